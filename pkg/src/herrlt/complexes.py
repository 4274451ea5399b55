"""Cochain complexes of operator expressions: Koszul, Herr (phi and psi), False-Tate, Iwasawa.

An OperatorExpr is a formal O_K/pi^n-linear combination of words in the atoms

* ``("phi",)``, ``("psi",)``              phi_M, psi_M
* ``("gamma", i)``                         the i-th generator of Gamma*
* ``("gt", x)``                            gamma-tilde^x, x a p-adic integer
* ``("ratio", x, y)``                      (gt^x - 1) / (gt^y - 1), y | x in Z_p

Words are written left to right as composition: ``("psi",), ("phi",)`` is
psi o phi, which is rewritten to (q/pi) id on construction.

Koszul conventions (components are subsets of generators, listed in the
display order phi, gamma_1..gamma_d, gt).  The differential entry from a
component S to S + {j} is

* j = phi:                  phi - 1                     (psi variant: psi - q/pi)
* j = gamma_k, gt not in S: (-1)^s (gamma_k - 1),       s = [phi in S] + #{gamma_i in S, i < k}
* j = gamma_k, gt in S:     (-1)^s (gamma_k - R(a_k P, P)),  s also counts gt
* j = gt:                   (-1)^[phi in S] (gt^P - 1)

with P the product of a_i over the gamma_i in S.  These reproduce the d = 2
block matrices of the Lubin-Tate and False-Tate Herr complexes, and d o d = 0.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Sequence

from .okring import INF, BaseField, OKElem, OKError
from .phigamma import (EtaleModule, Mat, ModuleElem, NonConvergent, mat_add, mat_identity, mat_mul,
                       mat_scale, mat_sub, mat_vec)
from .series import LaurentElem

Word = tuple


class ComplexError(OKError):
    pass


# ------------------------------------------------------------ operator exprs


class OperatorExpr:
    """Formal sum  sum_w c_w * w  over words w of atoms."""

    __slots__ = ("ctx", "n", "terms")

    def __init__(self, ctx: BaseField, n: int, terms: dict[Word, OKElem] | None = None):
        self.ctx = ctx
        self.n = n
        self.terms: dict[Word, OKElem] = {}
        for w, c in (terms or {}).items():
            self._add_term(w, c)

    def _add_term(self, word: Word, c: OKElem | int) -> None:
        if isinstance(c, int):
            c = self.ctx.elem(c, self.n)
        coeff, word = _normalize(self.ctx, self.n, tuple(word))
        c = (c * coeff).reduce(self.n)
        if c.is_zero():
            return
        if word in self.terms:
            s = (self.terms[word] + c).reduce(self.n)
            if s.is_zero():
                del self.terms[word]
            else:
                self.terms[word] = s
        else:
            self.terms[word] = c

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls, ctx, n) -> "OperatorExpr":
        return cls(ctx, n)

    @classmethod
    def identity(cls, ctx, n, c: OKElem | int = 1) -> "OperatorExpr":
        return cls(ctx, n, {(): c})

    @classmethod
    def atom(cls, ctx, n, *atom) -> "OperatorExpr":
        return cls(ctx, n, {(tuple(atom),): 1})

    # algebra ------------------------------------------------------------------
    def __add__(self, other: "OperatorExpr") -> "OperatorExpr":
        out = OperatorExpr(self.ctx, min(self.n, other.n), dict(self.terms))
        for w, c in other.terms.items():
            out._add_term(w, c)
        return out

    def __neg__(self) -> "OperatorExpr":
        return OperatorExpr(self.ctx, self.n, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other: "OperatorExpr") -> "OperatorExpr":
        return self + (-other)

    def scale(self, c: OKElem | int) -> "OperatorExpr":
        if isinstance(c, int):
            c = self.ctx.elem(c, self.n)
        return OperatorExpr(self.ctx, self.n, {w: v * c for w, v in self.terms.items()})

    def compose(self, other: "OperatorExpr") -> "OperatorExpr":
        """self o other."""
        out = OperatorExpr(self.ctx, min(self.n, other.n))
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                out._add_term(w1 + w2, c1 * c2)
        return out

    __matmul__ = compose

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorExpr):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None

    def atoms(self) -> set:
        return {a for w in self.terms for a in w}

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=_word_key):
            c = self.terms[w]
            parts.append(f"{_coeff_str(c)}*{_word_str(w)}")
        return " + ".join(parts)

    __repr__ = __str__

    # evaluation ---------------------------------------------------------------
    def evaluate(self, M: EtaleModule, m: ModuleElem, cap=None) -> ModuleElem:
        acc = None
        for w, c in self.terms.items():
            v = m
            for a in reversed(w):
                v = apply_atom(M, a, v, cap)
            v = v.scale(c)
            acc = v if acc is None else acc + v
        if acc is None:
            return ModuleElem([LaurentElem.zero(M.ctx, M.n, x.xprec) for x in m.coords])
        return acc


def _normalize(ctx: BaseField, n: int, word: Word) -> tuple[OKElem, Word]:
    """Rewrite psi o phi -> (q/pi) id and merge gt powers; returns (scalar, reduced word)."""
    coeff = ctx.one(n)
    out: list = []
    for a in word:
        if out and out[-1] == ("psi",) and a == ("phi",):
            out.pop()
            coeff = coeff * ctx.q_over_pi(n)
            continue
        if a == ("gt", 0):
            continue
        out.append(a)
    return coeff, tuple(out)


def _word_key(w: Word):
    return (len(w), [tuple(str(x) for x in a) for a in w])


def _coeff_str(c: OKElem) -> str:
    if c.ctx.D == 1:
        return str(c.coeffs[0])
    return "[" + ",".join(str(x) for x in c.coeffs) + "]"


def _atom_str(a) -> str:
    if a[0] == "phi":
        return "phi"
    if a[0] == "psi":
        return "psi"
    if a[0] == "gamma":
        return f"gamma{a[1] + 1}"
    if a[0] == "gt":
        return f"gt^{a[1]}"
    if a[0] == "ratio":
        return f"(gt^{a[1]}-1)/(gt^{a[2]}-1)"
    return str(a)


def _word_str(w: Word) -> str:
    return "id" if not w else ".".join(_atom_str(a) for a in w)


# ---------------------------------------------------------- atom evaluation


def _gt_matrix(M: EtaleModule, x: int) -> Mat:
    cache = M.__dict__.setdefault("_gt_cache", {})
    if x not in cache:
        cache[x] = gt_power_matrix(M, x)
    return cache[x]


def _ratio_matrix(M: EtaleModule, x: int, y: int) -> Mat:
    cache = M.__dict__.setdefault("_ratio_cache", {})
    if (x, y) not in cache:
        cache[(x, y)] = gamma_tilde_ratio_matrix(M, x, y)
    return cache[(x, y)]


def apply_atom(M: EtaleModule, a, m: ModuleElem, cap=None) -> ModuleElem:
    kind = a[0]
    if kind == "phi":
        return M.phi_M(m)
    if kind == "psi":
        return M.psi_M(m)
    if kind == "gamma":
        return M.gamma_M(a[1], m, cap)
    if kind == "gt":
        return ModuleElem(mat_vec(_gt_matrix(M, a[1]), m.coords))
    if kind == "ratio":
        return ModuleElem(mat_vec(_ratio_matrix(M, a[1], a[2]), m.coords))
    raise ComplexError(f"unknown atom {a!r}")


def _padic_prec(M: EtaleModule, cap: int) -> int:
    # enough p-adic digits for binomials C(c, k), k <= cap, to be right mod pi^n
    k_fact_val = sum(cap // M.ctx.p ** i for i in range(1, 64) if M.ctx.p ** i <= cap)
    return M.ctx.abs_prec(M.n) + k_fact_val + 2


def padic_div(x: int, y: int, p: int, N: int) -> int:
    """x / y in Z_p modulo p^N (y a unit, or y | x exactly)."""
    if y != 0 and x % y == 0:
        return x // y
    if y % p == 0:
        raise ComplexError("division by a non-unit exponent")
    return x * pow(y, -1, p ** N) % p ** N


def _binom(c: int, k: int) -> int:
    num = 1
    for i in range(k):
        num *= c - i
    den = 1
    for i in range(2, k + 1):
        den *= i
    return num // den


def gt_power_matrix(M: EtaleModule, x: int) -> Mat:
    """Matrix of gt^x = sum_k C(x, k) (B - 1)^k for a p-adic integer x."""
    if M.GammaTilde is None:
        raise ComplexError("module has no gamma-tilde action")
    from .phigamma import mat_binomial_power
    return mat_binomial_power(M.GammaTilde, x, 4 * M.n * M.octx.q)


def gamma_tilde_ratio_matrix(M: EtaleModule, x: int, y: int, cap: int | None = None) -> Mat:
    """(gt^x - 1)/(gt^y - 1) = sum_(k>=1) C(x/y, k) (gt^y - 1)^(k-1)."""
    if M.GammaTilde is None:
        raise ComplexError("module has no gamma-tilde action")
    cap = 4 * M.n * M.octx.q if cap is None else cap
    ctx, n, r = M.ctx, M.n, M.rank
    c = padic_div(x, y, ctx.p, _padic_prec(M, cap))
    N = mat_sub(_gt_matrix(M, y), mat_identity(ctx, r, n))
    acc = mat_scale(mat_identity(ctx, r, n), ctx.elem(c, n))
    term = mat_identity(ctx, r, n)
    for k in range(2, cap + 2):
        term = mat_mul(term, N)
        if all(e.is_zero() for row in term for e in row):
            return acc
        acc = mat_add(acc, mat_scale(term, ctx.elem(_binom(c, k), n)))
    raise NonConvergent("gamma-tilde series did not terminate within the cap")


def gamma_tilde_ratio(M: EtaleModule, a: int, b: int = 1) -> OperatorExpr:
    """The operator (gt^a - 1)/(gt^b - 1) as an expression (after checking convergence)."""
    gamma_tilde_ratio_matrix(M, a, b)
    if a == b:
        return OperatorExpr.identity(M.ctx, M.n)
    return OperatorExpr.atom(M.ctx, M.n, "ratio", a, b)


# ------------------------------------------------------------------ complexes


@dataclass
class CochainComplex:
    """Degrees 0..L; component labels per degree; differentials as block matrices of OperatorExpr.

    Degree 0 here is the first nonzero term (it sits in degree -1 in the
    labeling where each complex starts there).
    """

    kind: str
    module: EtaleModule
    generators: list[str]
    terms: list[list[tuple[str, ...]]]
    differentials: list[list[list[OperatorExpr]]]
    delta_projected: bool = True

    @property
    def length(self) -> int:
        return len(self.terms) - 1

    def ranks(self) -> list[int]:
        return [len(t) for t in self.terms]

    def block(self, i: int) -> list[list[OperatorExpr]]:
        return self.differentials[i]

    def apply_differential(self, i: int, x: Sequence[ModuleElem], cap=None) -> list[ModuleElem]:
        M = self.module
        out = []
        for row in self.differentials[i]:
            acc = None
            for op, xi in zip(row, x):
                if op.is_zero():
                    continue
                v = op.evaluate(M, xi, cap)
                acc = v if acc is None else acc + v
            if acc is None:
                acc = ModuleElem([LaurentElem.zero(M.ctx, M.n) for _ in range(M.rank)])
            out.append(acc)
        return out

    def to_text(self) -> str:
        lines = [f"complex kind={self.kind} module={self.module.name}",
                 "generators=" + ",".join(self.generators),
                 "ranks=" + ",".join(str(r) for r in self.ranks())]
        for i, blk in enumerate(self.differentials):
            lines.append(f"[d{i}] {len(blk)}x{len(blk[0]) if blk else 0}")
            src = self.terms[i]
            tgt = self.terms[i + 1]
            for r, row in enumerate(blk):
                for c, op in enumerate(row):
                    if not op.is_zero():
                        lines.append(f"  {_label(tgt[r])} <- {_label(src[c])}: {op}")
        return "\n".join(lines) + "\n"


def _label(S: tuple[str, ...]) -> str:
    return "{" + ",".join(S) + "}"


def _koszul(M: EtaleModule, kind: str, gens: list[str], entry, delta_projected=True) -> CochainComplex:
    L = len(gens)
    terms = [list(itertools.combinations(gens, r)) for r in range(L + 1)]
    diffs = []
    for r in range(L):
        blk = []
        for T in terms[r + 1]:
            row = []
            for S in terms[r]:
                if set(S) <= set(T):
                    (j,) = tuple(set(T) - set(S))
                    row.append(entry(S, j))
                else:
                    row.append(OperatorExpr.zero(M.ctx, M.n))
            blk.append(row)
        diffs.append(blk)
    return CochainComplex(kind, M, gens, terms, diffs, delta_projected)


def _is_gamma(g: str) -> bool:
    return g[0] == "g" and g[1:].isdigit()


def _gamma_index(g: str) -> int:
    return int(g[1:]) - 1


def _entry_factory(M: EtaleModule, psi_variant: bool, ft: bool):
    ctx, n = M.ctx, M.n
    one = OperatorExpr.identity(ctx, n)
    q_over_pi = ctx.q_over_pi(n)
    exps = M.ft.exponents if (ft and M.ft is not None) else None

    def P_of(S) -> int:
        P = 1
        for g in S:
            if _is_gamma(g):
                P *= exps[_gamma_index(g)]
        return P

    def entry(S: tuple[str, ...], j: str) -> OperatorExpr:
        has_phi = "phi" in S
        has_gt = "gt" in S
        if j == "phi":
            if psi_variant:
                return OperatorExpr.atom(ctx, n, "psi") - OperatorExpr.identity(ctx, n, q_over_pi)
            return OperatorExpr.atom(ctx, n, "phi") - one
        if j == "gt":
            P = P_of(S)
            e = OperatorExpr.atom(ctx, n, "gt", P) - one
            return -e if has_phi else e
        k = _gamma_index(j)
        s = int(has_phi) + sum(1 for g in S if _is_gamma(g) and _gamma_index(g) < k)
        g = OperatorExpr.atom(ctx, n, "gamma", k)
        if not has_gt:
            e = g - one
        else:
            s += 1
            P = P_of(S)
            a = exps[k]
            e = g - (one if a * P == P else OperatorExpr.atom(ctx, n, "ratio", a * P, P))
        return -e if s % 2 else e

    return entry


def _gamma_labels(M: EtaleModule) -> list[str]:
    return [f"g{i + 1}" for i in range(M.octx.d)]


def _check_p(M: EtaleModule) -> None:
    if M.ctx.p == 2:
        raise ComplexError("Herr complexes require p odd")


def koszul_gamma(M: EtaleModule) -> CochainComplex:
    entry = _entry_factory(M, False, False)
    return _koszul(M, "koszul", _gamma_labels(M), entry)


def herr_LT(M: EtaleModule) -> CochainComplex:
    _check_p(M)
    return _koszul(M, "lt", ["phi"] + _gamma_labels(M), _entry_factory(M, False, False))


def herr_psi_LT(M: EtaleModule) -> CochainComplex:
    _check_p(M)
    return _koszul(M, "lt-psi", ["phi"] + _gamma_labels(M), _entry_factory(M, True, False))


def herr_FT(M: EtaleModule) -> CochainComplex:
    _check_p(M)
    if M.GammaTilde is None:
        raise ComplexError("False-Tate complex needs a gamma-tilde action")
    return _koszul(M, "ft", ["phi"] + _gamma_labels(M) + ["gt"], _entry_factory(M, False, True))


def herr_psi_FT(M: EtaleModule) -> CochainComplex:
    _check_p(M)
    if M.GammaTilde is None:
        raise ComplexError("False-Tate complex needs a gamma-tilde action")
    return _koszul(M, "ft-psi", ["phi"] + _gamma_labels(M) + ["gt"], _entry_factory(M, True, True))


def iwasawa_complex(M: EtaleModule) -> CochainComplex:
    """0 -> M --(psi - 1)--> M -> 0 on the (twisted) module itself."""
    ctx, n = M.ctx, M.n
    op = OperatorExpr.atom(ctx, n, "psi") - OperatorExpr.identity(ctx, n)
    return CochainComplex("iwasawa", M, ["psi"], [[()], [("psi",)]], [[[op]]], delta_projected=False)


BUILDERS = {
    "lt": herr_LT,
    "lt-psi": herr_psi_LT,
    "ft": herr_FT,
    "ft-psi": herr_psi_FT,
    "iwasawa": iwasawa_complex,
    "koszul": koszul_gamma,
}


def build_complex(kind: str, M: EtaleModule) -> CochainComplex:
    try:
        return BUILDERS[kind](M)
    except KeyError:
        raise ComplexError(f"unknown complex kind {kind!r}") from None


# ------------------------------------------------------------- chain maps


@dataclass
class ChainMap:
    source: CochainComplex
    target: CochainComplex
    blocks: list[list[list[OperatorExpr]]]

    def apply(self, i: int, x: Sequence[ModuleElem], cap=None) -> list[ModuleElem]:
        M = self.source.module
        out = []
        for row in self.blocks[i]:
            acc = None
            for op, xi in zip(row, x):
                if op.is_zero():
                    continue
                v = op.evaluate(M, xi, cap)
                acc = v if acc is None else acc + v
            if acc is None:
                acc = ModuleElem([LaurentElem.zero(M.ctx, M.n) for _ in range(M.rank)])
            out.append(acc)
        return out


def phi_to_psi_morphism(src: CochainComplex, tgt: CochainComplex) -> ChainMap:
    """id on components without phi, -psi_M on components containing phi."""
    M = src.module
    ctx, n = M.ctx, M.n
    blocks = []
    for comps_s, comps_t in zip(src.terms, tgt.terms):
        blk = []
        for T in comps_t:
            row = []
            for S in comps_s:
                if S != T:
                    row.append(OperatorExpr.zero(ctx, n))
                elif "phi" in S:
                    row.append(-OperatorExpr.atom(ctx, n, "psi"))
                else:
                    row.append(OperatorExpr.identity(ctx, n))
            blk.append(row)
        blocks.append(blk)
    return ChainMap(src, tgt, blocks)


# ---------------------------------------------------------- verification


def block_compose(A: list[list[OperatorExpr]], B: list[list[OperatorExpr]]) -> list[list[OperatorExpr]]:
    """Block product A . B (apply B first)."""
    ctx, n = _first(A).ctx, _first(A).n
    out = []
    for row in A:
        new = []
        for j in range(len(B[0])):
            acc = OperatorExpr.zero(ctx, n)
            for k, a in enumerate(row):
                if a.is_zero() or B[k][j].is_zero():
                    continue
                acc = acc + a.compose(B[k][j])
            new.append(acc)
        out.append(new)
    return out


def _first(A):
    return A[0][0]


def random_elem(M: EtaleModule, rng: random.Random, lo: int = -3, hi: int = 4, xprec=None) -> ModuleElem:
    ctx = M.ctx
    N = ctx.abs_prec(M.n)
    xp = xprec if xprec is not None else INF
    coords = []
    for _ in range(M.rank):
        coeffs = {k: ctx.elem([rng.randrange(ctx.p ** N) for _ in range(ctx.D)], M.n) for k in range(lo, hi)}
        coords.append(LaurentElem(ctx, coeffs, M.n, xp))
    return ModuleElem(coords)


def d2_residual(C: CochainComplex, samples: int = 10, seed: int = 0, cap: int | None = None,
                lo: int = -2, hi: int = 3) -> float:
    """min pi-valuation of d_(i+1) d_i x over random x (INF when every residual vanishes)."""
    M = C.module
    rng = random.Random(seed)
    cap = cap if cap is not None else 8 * M.octx.q + 16
    best = INF
    for i in range(C.length - 1):
        for _ in range(samples):
            x = [random_elem(M, rng, lo, hi) for _ in C.terms[i]]
            y = C.apply_differential(i, x, cap)
            z = C.apply_differential(i + 1, y, cap)
            for m in z:
                for c in m.coords:
                    for k, v in c.coeffs.items():
                        if k < c.xprec:
                            best = min(best, v.v_pi())
    return best


def d2_symbolic(C: CochainComplex) -> bool:
    """d_(i+1) o d_i vanishes as a formal expression (holds whenever the generators commute formally).

    Only used for complexes without gamma-tilde ratios, whose words commute
    only after evaluation.
    """
    for i in range(C.length - 1):
        P = block_compose(C.differentials[i + 1], C.differentials[i])
        for row in P:
            for op in row:
                if not _commutative_zero(op):
                    return False
    return True


def _commutative_zero(op: OperatorExpr) -> bool:
    acc: dict = {}
    for w, c in op.terms.items():
        key = tuple(sorted(w, key=lambda a: tuple(str(x) for x in a)))
        acc[key] = acc[key] + c if key in acc else c
    return all(v.is_zero() for v in acc.values())


def chain_map_residual(F: ChainMap, samples: int = 10, seed: int = 0, cap: int | None = None) -> float:
    src, tgt = F.source, F.target
    M = src.module
    rng = random.Random(seed)
    cap = cap if cap is not None else 8 * M.octx.q + 16
    best = INF
    for i in range(src.length):
        for _ in range(samples):
            x = [random_elem(M, rng, -2, 3, xprec=None) for _ in src.terms[i]]
            a = tgt.apply_differential(i, F.apply(i, x, cap), cap)
            b = F.apply(i + 1, src.apply_differential(i, x, cap), cap)
            for u, v in zip(a, b):
                for cu, cv in zip(u.coords, v.coords):
                    xp = min(cu.xprec, cv.xprec)
                    d = (cu - cv).truncate(xp)
                    for c in d.coeffs.values():
                        best = min(best, c.v_pi())
    return best
