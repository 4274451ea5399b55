"""Etale (phi_q, Gamma_LT)-modules over O_E / pi^n as explicit matrix data.

Conventions.  An element is a column vector v of coordinates in the basis
e_1..e_r.  A semilinear operator T with matrix A_T acts by v -> A_T * tau(v),
where tau is the base action (phi_q, gamma_a or delta = gamma_zeta) on each
coordinate.  The column j of A_T holds the coordinates of T(e_j).  Composition
S o T therefore has matrix A_S * sigma(A_T).

Consequences used throughout:

* phi and gamma commute iff  A_g * g(Phi) = Phi * phi(A_g);
* two generators commute iff A_g * g(A_h) = A_h * h(A_g);
* the False-Tate relation gamma_i o gt = gt^(a_i) o gamma_i reads
  A_i * gamma_i(B) = B^(a_i) * A_i, where gt acts O_E-linearly by B;
* the dual is Phi^v = (Phi^T)^-1, A_g^v = chi_LT(g) (A_g^T)^-1,
  B^v = (B^T)^-1, which makes the residue pairing Gamma-invariant and puts
  phi and psi in adjunction.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .frobpsi import OperatorContext
from .okring import INF, BaseField, OKElem, OKError, teichmuller
from .series import LaurentElem, l_inv, l_residue

Mat = list[list[LaurentElem]]


class ModuleError(OKError):
    pass


class NonConvergent(ModuleError):
    pass


# ------------------------------------------------------------------ matrices


def mat_const(ctx: BaseField, rows: Sequence[Sequence[OKElem | int]], n: int) -> Mat:
    return [[LaurentElem.constant(c, ctx, n) for c in row] for row in rows]


def mat_identity(ctx: BaseField, r: int, n: int) -> Mat:
    return [[LaurentElem.constant(1 if i == j else 0, ctx, n) for j in range(r)] for i in range(r)]


def mat_zero(ctx: BaseField, r: int, c: int, n: int) -> Mat:
    return [[LaurentElem.zero(ctx, n) for _ in range(c)] for _ in range(r)]


def mat_mul(A: Mat, B: Mat) -> Mat:
    out = []
    for row in A:
        new = []
        for j in range(len(B[0])):
            acc = row[0] * B[0][j]
            for k in range(1, len(B)):
                acc = acc + row[k] * B[k][j]
            new.append(acc)
        out.append(new)
    return out


def mat_add(A: Mat, B: Mat) -> Mat:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_sub(A: Mat, B: Mat) -> Mat:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def mat_scale(A: Mat, c: OKElem | int) -> Mat:
    return [[a.scale(c) for a in row] for row in A]


def mat_map(f: Callable[[LaurentElem], LaurentElem], A: Mat) -> Mat:
    return [[f(a) for a in row] for row in A]


def mat_T(A: Mat) -> Mat:
    return [list(col) for col in zip(*A)]


def mat_vec(A: Mat, v: Sequence[LaurentElem]) -> list[LaurentElem]:
    out = []
    for row in A:
        acc = row[0] * v[0]
        for k in range(1, len(v)):
            acc = acc + row[k] * v[k]
        out.append(acc)
    return out


def mat_truncate(A: Mat, xprec) -> Mat:
    return [[a.truncate(xprec) for a in row] for row in A]


def mat_det(A: Mat) -> LaurentElem:
    r = len(A)
    if r == 1:
        return A[0][0]
    if r == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    acc = None
    for j in range(r):
        if A[0][j].is_zero() and A[0][j].is_exact():
            continue
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        term = A[0][j] * mat_det(minor)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    if acc is None:
        return LaurentElem.zero(A[0][0].ctx, A[0][0].n)
    return acc


def mat_adjugate(A: Mat) -> Mat:
    r = len(A)
    ctx, n = A[0][0].ctx, A[0][0].n
    if r == 1:
        return [[LaurentElem.constant(1, ctx, n)]]
    adj = mat_zero(ctx, r, r, n)
    for i in range(r):
        for j in range(r):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(A) if k != i]
            d = mat_det(minor)
            adj[j][i] = -d if (i + j) % 2 else d
    return adj


def mat_inv(A: Mat, xprec=None) -> Mat:
    """Inverse over O_E / pi^n via the adjugate and the inverse determinant."""
    det = mat_det(A)
    if not det.is_unit():
        raise ModuleError("matrix is not invertible over O_E / pi^n")
    dinv = l_inv(det, xprec)
    out = [[a * dinv for a in row] for row in mat_adjugate(A)]
    return out if xprec is None else mat_truncate(out, xprec)


def mat_residual(A: Mat, B: Mat | None = None) -> float:
    """Smallest pi-valuation among the coefficients of A - B (INF when zero)."""
    D = A if B is None else mat_sub(A, B)
    best = INF
    for row in D:
        for x in row:
            for c in x.coeffs.values():
                best = min(best, c.v_pi())
    return best


def mat_kron(A: Mat, B: Mat) -> Mat:
    ra, ca, rb, cb = len(A), len(A[0]), len(B), len(B[0])
    out = []
    for i in range(ra):
        for k in range(rb):
            out.append([A[i][j] * B[k][l] for j in range(ca) for l in range(cb)])
    return out


def mat_is_constant(A: Mat) -> bool:
    return all(x.is_exact() and all(k == 0 for k in x.coeffs) for row in A for x in row)


def mat_is_upper(A: Mat) -> bool:
    """All entries in O_K[[X]] (no negative exponents)."""
    return all(not x.coeffs or x.val >= 0 for row in A for x in row)


def mat_binomial_power(B: Mat, a: int, cap: int) -> Mat:
    """B^a = sum_k C(a, k) (B - 1)^k for a p-adic integer a, summed until the terms vanish."""
    ctx, n, r = B[0][0].ctx, B[0][0].n, len(B)
    I = mat_identity(ctx, r, n)
    N = mat_sub(B, I)
    acc = I
    term = I
    binom = 1
    for k in range(1, cap + 1):
        term = mat_mul(term, N)
        binom = binom * (a - k + 1) // k if k > 0 else 1
        if all(x.is_zero() for row in term for x in row):
            return acc
        acc = mat_add(acc, mat_scale(term, ctx.elem(binom, n)))
    if all(x.is_zero() for row in mat_mul(term, N) for x in row):
        return acc
    raise NonConvergent("B - 1 is not nilpotent within the iteration cap")


# ------------------------------------------------------------------ modules


@dataclass
class FTGroupData:
    """Exponents a_i = chi_LT(gamma_i) in Z_p, one per Gamma* generator."""

    exponents: list[int]

    @classmethod
    def default(cls, octx: OperatorContext) -> "FTGroupData":
        out = []
        for a in octx.gamma_gens:
            if any(a.coeffs[1:]):
                raise ModuleError("chi_LT(gamma_i) is not in Z_p; pass the exponents explicitly")
            out.append(a.coeffs[0])
        return cls(out)


@dataclass
class ValidationReport:
    items: list[tuple[str, bool, float]] = field(default_factory=list)

    def add(self, name: str, residual: float) -> None:
        self.items.append((name, residual == INF, residual))

    def add_bool(self, name: str, ok: bool) -> None:
        self.items.append((name, ok, INF if ok else 0))

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.items)

    def __str__(self) -> str:
        lines = []
        for name, passed, res in self.items:
            rv = "inf" if res == INF else str(int(res))
            lines.append(f"{name}: {'pass' if passed else 'FAIL'} residual_v={rv}")
        return "\n".join(lines)


class ModuleElem:
    __slots__ = ("coords",)

    def __init__(self, coords: Sequence[LaurentElem]):
        self.coords = list(coords)

    def __add__(self, other: "ModuleElem") -> "ModuleElem":
        return ModuleElem([a + b for a, b in zip(self.coords, other.coords)])

    def __sub__(self, other: "ModuleElem") -> "ModuleElem":
        return ModuleElem([a - b for a, b in zip(self.coords, other.coords)])

    def __neg__(self) -> "ModuleElem":
        return ModuleElem([-a for a in self.coords])

    def scale(self, c) -> "ModuleElem":
        return ModuleElem([a.scale(c) for a in self.coords])

    def truncate(self, xprec=INF, n=None) -> "ModuleElem":
        return ModuleElem([a.truncate(xprec, n) for a in self.coords])

    @property
    def xprec(self):
        return min(a.xprec for a in self.coords)

    def is_zero(self) -> bool:
        return all(a.is_zero() for a in self.coords)

    def eq_window(self, other: "ModuleElem", xprec=None) -> bool:
        return all(a.eq_window(b, xprec) for a, b in zip(self.coords, other.coords))

    def __repr__(self) -> str:
        return f"ModuleElem({self.coords!r})"


class EtaleModule:
    """Matrix presentation of an etale (phi_q, Gamma_LT)-module over O_E / pi^n."""

    def __init__(self, octx: OperatorContext, Phi: Mat, Gamma: list[Mat], Delta: Mat,
                 GammaTilde: Mat | None = None, ft: FTGroupData | None = None,
                 name: str = "module", xprec: int = 24):
        self.octx = octx
        self.ctx = octx.ctx
        self.n = octx.n
        self.rank = len(Phi)
        if len(Gamma) != octx.d:
            raise ModuleError("one Gamma matrix per generator is required")
        self.Phi = Phi
        self.Gamma = Gamma
        self.Delta = Delta
        self.GammaTilde = GammaTilde
        if GammaTilde is not None and ft is None:
            ft = FTGroupData.default(octx)
        self.ft = ft
        self.name = name
        self.xprec = xprec
        self._phi_inv: Mat | None = None

    def __repr__(self) -> str:
        return f"EtaleModule({self.name}, rank={self.rank}, n={self.n})"

    # structural flags -------------------------------------------------------
    @property
    def all_mats(self) -> list[Mat]:
        mats = [self.Phi, self.Delta] + list(self.Gamma)
        if self.GammaTilde is not None:
            mats.append(self.GammaTilde)
        return mats

    def is_constant(self) -> bool:
        return all(mat_is_constant(A) for A in self.all_mats)

    def is_upper(self) -> bool:
        return all(mat_is_upper(A) for A in self.all_mats)

    # base actions on coordinates -----------------------------------------------
    def _gamma_base(self, a: OKElem, x: LaurentElem, cap=None) -> LaurentElem:
        cap = self.xprec if cap is None else cap
        if x.is_exact() and all(k == 0 for k in x.coeffs):
            return x
        return self.octx.gamma(a, x, cap)

    def _base(self, op: str, i: int | None, x: LaurentElem, cap=None) -> LaurentElem:
        if op == "phi":
            return self.octx.phi(x)
        if op == "gamma":
            return self._gamma_base(self.octx.gamma_gens[i], x, cap)
        if op == "delta":
            return self._gamma_base(self.octx.zeta, x, cap)
        if op == "gt":
            return x
        raise ModuleError(op)

    def op_matrix(self, op: str, i: int | None = None) -> Mat:
        if op == "phi":
            return self.Phi
        if op == "gamma":
            return self.Gamma[i]
        if op == "delta":
            return self.Delta
        if op == "gt":
            if self.GammaTilde is None:
                raise ModuleError("module has no gamma-tilde action")
            return self.GammaTilde
        raise ModuleError(op)

    def apply(self, op: str, m: ModuleElem, i: int | None = None, cap=None) -> ModuleElem:
        A = self.op_matrix(op, i)
        v = [self._base(op, i, x, cap) for x in m.coords]
        return ModuleElem(mat_vec(A, v))

    def phi_M(self, m: ModuleElem) -> ModuleElem:
        return self.apply("phi", m)

    def gamma_M(self, i: int, m: ModuleElem, cap=None) -> ModuleElem:
        return self.apply("gamma", m, i, cap)

    def delta_M(self, m: ModuleElem, cap=None) -> ModuleElem:
        return self.apply("delta", m, None, cap)

    def gt_M(self, m: ModuleElem) -> ModuleElem:
        return self.apply("gt", m)

    def phi_inverse_matrix(self) -> Mat:
        if self._phi_inv is None:
            cap = None if mat_is_constant(self.Phi) else self.xprec
            self._phi_inv = mat_inv(self.Phi, cap)
        return self._phi_inv

    def psi_M(self, m: ModuleElem) -> ModuleElem:
        """psi_M(m) = psi(Phi^-1 v): write m in the basis phi_M(e_j), apply psi to the coefficients."""
        w = mat_vec(self.phi_inverse_matrix(), m.coords)
        return ModuleElem([self.octx.psi(x) for x in w])

    def delta_project(self, m: ModuleElem, cap=None) -> ModuleElem:
        """e_Delta = (q - 1)^-1 sum_k delta^k."""
        q = self.octx.q
        acc = m
        cur = m
        for _ in range(q - 2):
            cur = self.delta_M(cur, cap)
            acc = acc + cur
        inv = self.ctx.elem(q - 1, self.n).inv()
        return acc.scale(inv)

    def elem(self, coords: Sequence[LaurentElem | dict | int]) -> ModuleElem:
        out = []
        for c in coords:
            if isinstance(c, LaurentElem):
                out.append(c)
            elif isinstance(c, dict):
                out.append(LaurentElem(self.ctx, c, self.n))
            else:
                out.append(LaurentElem.constant(c, self.ctx, self.n))
        return ModuleElem(out)


# --------------------------------------------------------------- validation


def _semi(M: EtaleModule, op: str, i, A: Mat) -> Mat:
    return mat_map(lambda x: M._base(op, i, x), A)


def validate(M: EtaleModule) -> ValidationReport:
    rep = ValidationReport()
    octx = M.octx
    det = mat_det(M.Phi)
    rep.add_bool("etale det(Phi) unit", det.is_unit())
    for i in range(octx.d):
        A = M.Gamma[i]
        rep.add_bool(f"Gamma[{i}] invertible", mat_det(A).is_unit())
        rep.add(f"commute phi gamma[{i}]",
                _window_residual(mat_mul(A, _semi(M, "gamma", i, M.Phi)), mat_mul(M.Phi, _semi(M, "phi", None, A))))
    rep.add("commute phi delta",
            _window_residual(mat_mul(M.Delta, _semi(M, "delta", None, M.Phi)),
                             mat_mul(M.Phi, _semi(M, "phi", None, M.Delta))))
    for i, j in itertools.combinations(range(octx.d), 2):
        Ai, Aj = M.Gamma[i], M.Gamma[j]
        rep.add(f"commute gamma[{i}] gamma[{j}]",
                _window_residual(mat_mul(Ai, _semi(M, "gamma", i, Aj)), mat_mul(Aj, _semi(M, "gamma", j, Ai))))
    for i in range(octx.d):
        Ai = M.Gamma[i]
        rep.add(f"commute delta gamma[{i}]",
                _window_residual(mat_mul(M.Delta, _semi(M, "delta", None, Ai)),
                                 mat_mul(Ai, _semi(M, "gamma", i, M.Delta))))
    # Delta^(q-1) = 1 as a semilinear operator
    acc = M.Delta
    cur = M.Delta
    for _ in range(octx.q - 2):
        cur = _semi(M, "delta", None, cur)
        acc = mat_mul(acc, cur)
    rep.add("delta order divides q-1", _window_residual(acc, mat_identity(M.ctx, M.rank, M.n)))
    if M.GammaTilde is not None:
        B = M.GammaTilde
        rep.add_bool("gamma-tilde invertible", mat_det(B).is_unit())
        rep.add("commute phi gamma-tilde", _window_residual(mat_mul(B, M.Phi), mat_mul(M.Phi, _semi(M, "phi", None, B))))
        rep.add("commute delta gamma-tilde",
                _window_residual(mat_mul(M.Delta, _semi(M, "delta", None, B)), mat_mul(B, M.Delta)))
        cap = 4 * M.n * octx.q
        for i in range(octx.d):
            Ai = M.Gamma[i]
            try:
                Ba = mat_binomial_power(B, M.ft.exponents[i], cap)
            except NonConvergent:
                rep.add_bool(f"false-Tate relation gamma[{i}]", False)
                continue
            rep.add(f"false-Tate relation gamma[{i}]",
                    _window_residual(mat_mul(Ai, _semi(M, "gamma", i, B)), mat_mul(Ba, Ai)))
    return rep


def _window_residual(A: Mat, B: Mat) -> float:
    best = INF
    for ra, rb in zip(A, B):
        for a, b in zip(ra, rb):
            xp = min(a.xprec, b.xprec)
            d = (a - b).truncate(xp)
            for c in d.coeffs.values():
                best = min(best, c.v_pi())
    return best


# ------------------------------------------------------------- constructors


def trivial_module(octx: OperatorContext, name: str = "trivial") -> EtaleModule:
    ctx, n = octx.ctx, octx.n
    I = mat_identity(ctx, 1, n)
    return EtaleModule(octx, I, [mat_identity(ctx, 1, n) for _ in range(octx.d)], mat_identity(ctx, 1, n),
                       name=name)


def character_module(octx: OperatorContext, c_phi: OKElem | int, chi_gamma: Sequence[OKElem | int],
                     chi_zeta: OKElem | int, name: str = "character") -> EtaleModule:
    ctx, n = octx.ctx, octx.n

    def el(c):
        return ctx.elem(c, n) if isinstance(c, int) else c.reduce(n) if c.prec >= n else c

    c_phi, chi_zeta = el(c_phi), el(chi_zeta)
    chis = [el(c) for c in chi_gamma]
    if len(chis) != octx.d:
        raise ModuleError("one character value per generator is required")
    for c in [c_phi, chi_zeta] + chis:
        if not c.is_unit():
            raise ModuleError("character values must be units")
    if not (chi_zeta ** (octx.q - 1)).is_one():
        raise ModuleError("chi(zeta)^(q-1) must be 1")
    return EtaleModule(octx, mat_const(ctx, [[c_phi]], n), [mat_const(ctx, [[c]], n) for c in chis],
                       mat_const(ctx, [[chi_zeta]], n), name=name)


def chi_lt_module(octx: OperatorContext, c_phi: OKElem | int = 1, name: str = "chi_lt") -> EtaleModule:
    return character_module(octx, c_phi, list(octx.gamma_gens), octx.zeta, name=name)


def tensor(M1: EtaleModule, M2: EtaleModule, name: str | None = None) -> EtaleModule:
    if M1.octx is not M2.octx:
        raise ModuleError("modules over different operator contexts")
    Phi = mat_kron(M1.Phi, M2.Phi)
    Gamma = [mat_kron(a, b) for a, b in zip(M1.Gamma, M2.Gamma)]
    Delta = mat_kron(M1.Delta, M2.Delta)
    GT = None
    ft = None
    if M1.GammaTilde is not None or M2.GammaTilde is not None:
        ctx, n = M1.ctx, M1.n
        B1 = M1.GammaTilde or mat_identity(ctx, M1.rank, n)
        B2 = M2.GammaTilde or mat_identity(ctx, M2.rank, n)
        GT = mat_kron(B1, B2)
        ft = M1.ft or M2.ft
    return EtaleModule(M1.octx, Phi, Gamma, Delta, GT, ft, name=name or f"({M1.name} x {M2.name})",
                       xprec=min(M1.xprec, M2.xprec))


def dual(M: EtaleModule, name: str | None = None) -> EtaleModule:
    """Hom(M, O_E/pi^n (chi_LT)): Phi^v = (Phi^T)^-1, A^v = chi_LT(g) (A^T)^-1."""
    octx = M.octx
    n = M.n
    cap = None if M.is_constant() else M.xprec

    def tinv(A):
        return mat_inv(mat_T(A), cap)

    Phi = tinv(M.Phi)
    Gamma = [mat_scale(tinv(A), a.reduce(n)) for A, a in zip(M.Gamma, octx.gamma_gens)]
    Delta = mat_scale(tinv(M.Delta), octx.zeta.reduce(n))
    GT = tinv(M.GammaTilde) if M.GammaTilde is not None else None
    return EtaleModule(octx, Phi, Gamma, Delta, GT, M.ft, name=name or f"dual({M.name})", xprec=M.xprec)


def rank2_constant_module(octx: OperatorContext, name: str = "rank2_const") -> EtaleModule:
    """Extension of the trivial character by an unramified twist: Phi = [[1,1],[0,u]]."""
    ctx, n = octx.ctx, octx.n
    u = ctx.elem(-1, n)
    Phi = mat_const(ctx, [[1, 1], [0, u]], n)
    Gamma = [mat_identity(ctx, 2, n) for _ in range(octx.d)]
    return EtaleModule(octx, Phi, Gamma, mat_identity(ctx, 2, n), name=name)


def ft_unipotent_module(octx: OperatorContext, exponents: Sequence[int] | None = None, b: int = 1,
                        name: str = "ft_unipotent") -> EtaleModule:
    """Rank 2: Phi = 1, gt = [[1, b], [0, 1]], gamma_i = diag(a_i, 1) with a_i the False-Tate exponents."""
    ctx, n = octx.ctx, octx.n
    ft = FTGroupData(list(exponents)) if exponents is not None else FTGroupData.default(octx)
    B = mat_const(ctx, [[1, b], [0, 1]], n)
    Gamma = [mat_const(ctx, [[a, 0], [0, 1]], n) for a in ft.exponents]
    return EtaleModule(octx, mat_identity(ctx, 2, n), Gamma, mat_identity(ctx, 2, n), B, ft, name=name)


# ------------------------------------------------------------------ pairing


def residue_pairing(M: EtaleModule, m: ModuleElem, F: ModuleElem) -> OKElem:
    """<m, F> = pi^-n Res(F^T m lambda'(X) dX) mod O_K, returned as the numerator in O_K/pi^n."""
    h = F.coords[0] * m.coords[0]
    for a, b in zip(F.coords[1:], m.coords[1:]):
        h = h + a * b
    if h.xprec <= -1:
        from .series import ResidueOutsideWindow
        raise ResidueOutsideWindow("pairing integrand is not known in degree -1")
    if not h.coeffs or h.val > -1:
        return M.ctx.zero(M.n)
    need = -h.val
    lam = M.octx.group.lambda_prime(need + 1)
    return l_residue((h * lam).truncate(0))


def psi_module(M: EtaleModule, m: ModuleElem) -> ModuleElem:
    return M.psi_M(m)


def delta_project(M: EtaleModule, m: ModuleElem) -> ModuleElem:
    return M.delta_project(m)


# ------------------------------------------------------------- serialization

_SECTION = re.compile(r"^\[(\w+)(?: (\d+))?(?: (\d+))? (\d+)\]$")


def module_to_text(M: EtaleModule) -> str:
    octx = M.octx
    lines = [
        f"module name={M.name}",
        f"field {M.ctx}",
        f"rank={M.rank}",
        f"n={M.n}",
        f"xprec={M.xprec}",
        "gens=" + ";".join(f"[{','.join(str(c) for c in a.coeffs)}]" for a in octx.gamma_gens),
        "zeta_residue=[" + ",".join(str(c) for c in octx.zeta.residue()) + "]",
    ]
    if M.ft is not None:
        lines.append("ft_exponents=" + ",".join(str(a) for a in M.ft.exponents))

    def dump(tag: str, A: Mat, idx=None):
        for i, row in enumerate(A):
            for j, x in enumerate(row):
                head = f"[{tag}" + (f" {idx}" if idx is not None else "") + f" {i} {j}]"
                lines.append(head)
                lines.append(x.to_text())

    dump("Phi", M.Phi)
    for k, A in enumerate(M.Gamma):
        dump("Gamma", A, k)
    dump("Delta", M.Delta)
    if M.GammaTilde is not None:
        dump("GammaTilde", M.GammaTilde)
    return "\n".join(lines) + "\n"


def module_from_text(text: str, octx: OperatorContext | None = None, group_degree: int = 8) -> EtaleModule:
    lines = text.splitlines()
    head: dict[str, str] = {}
    body_start = 0
    for idx, ln in enumerate(lines):
        if ln.startswith("["):
            body_start = idx
            break
        if ln.startswith("module "):
            head["name"] = ln.split("name=", 1)[1].strip()
        elif ln.startswith("field "):
            head["field"] = ln[len("field "):].strip()
        elif "=" in ln:
            k, v = ln.split("=", 1)
            head[k.strip()] = v.strip()
    else:
        body_start = len(lines)
    ctx = BaseField.parse(head["field"])
    n = int(head["n"])
    rank = int(head["rank"])
    if octx is None:
        gens = []
        for part in head["gens"].split(";"):
            if part.strip():
                gens.append(ctx.elem([int(c) for c in part.strip("[] ").split(",")], n + 64))
        zres = [int(c) for c in head["zeta_residue"].strip("[]").split(",")]
        zeta = teichmuller(ctx, zres, n + 64)
        octx = OperatorContext(ctx, n, gens, zeta, group_degree)
    mats: dict[tuple, dict[tuple[int, int], LaurentElem]] = {}
    i = body_start
    while i < len(lines):
        ln = lines[i].strip()
        if not ln:
            i += 1
            continue
        parts = ln.strip("[]").split()
        tag = parts[0]
        nums = [int(x) for x in parts[1:]]
        key = (tag, nums[0]) if len(nums) == 3 else (tag,)
        r, c = nums[-2], nums[-1]
        j = i + 1
        chunk = []
        while j < len(lines) and not lines[j].startswith("["):
            chunk.append(lines[j])
            j += 1
        mats.setdefault(key, {})[(r, c)] = LaurentElem.from_text(ctx, "\n".join(chunk))
        i = j

    def get(key) -> Mat:
        d = mats[key]
        return [[d[(a, b)] for b in range(rank)] for a in range(rank)]

    Gamma = [get(("Gamma", k)) for k in range(octx.d)]
    GT = get(("GammaTilde",)) if ("GammaTilde",) in mats else None
    ft = None
    if "ft_exponents" in head:
        ft = FTGroupData([int(x) for x in head["ft_exponents"].split(",")])
    return EtaleModule(octx, get(("Phi",)), Gamma, get(("Delta",)), GT, ft, name=head.get("name", "module"),
                       xprec=int(head.get("xprec", 24)))
