"""Cohomology of operator complexes by window restriction and Smith normal form.

Two restriction modes.

``exact``  (phi-type complexes on modules whose matrices lie in O_K[[X]]):
    the subcomplex built on X O_K[[X]] is acyclic, because phi_M - 1 is
    bijective there, so the complex on M / X O_K[[X]] has the same cohomology.
    On that quotient the component S only keeps exponents j >= lo_S, where
    components containing phi get lo = -b and the others
    lo' = ceil((-b + (n - 1)(q - 1)) / q), so that phi(X^(lo')) stays above
    -b.  Every window is then a genuine subcomplex and the windows exhaust the
    quotient.

``projected`` (psi-type complexes, Iwasawa complexes, modules with negative
    exponents): operators are evaluated exactly on the window [-b, b) and the
    images are cut back to the window.  The result is flagged as lossy.

For a window b the reported H^i is the image of H^i(window b) in
H^i(window f b), i.e. (Z_b + B_fb) / B_fb, with f from ambient_factor.  Its structure as an
O_K/pi^n-module is read off from the lengths of pi^j (Z_b + B_fb) / B_fb.
All lattice work is done over Z_p after restriction of scalars, modulo
p^ceil(n/e), with the lattice pi^n O_K always included.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .complexes import ChainMap, CochainComplex, OperatorExpr
from .okring import INF, BaseField, OKElem, OKError
from .phigamma import EtaleModule, ModuleElem, mat_is_constant
from .series import LaurentElem


class CohomologyError(OKError):
    pass


class NotStabilized(CohomologyError):
    pass


class NoCertificate(CohomologyError):
    pass


class PrecisionUnderflow(CohomologyError):
    pass


# ------------------------------------------------------------ O-level SNF


def snf(A: Sequence[Sequence[OKElem]]) -> tuple[list[int], list[list[OKElem]], list[list[OKElem]]]:
    """Smith normal form over O_K / pi^n.

    Returns (k, U, V) with U A V = diag(pi^k_1, pi^k_2, ...) (zero rows and
    columns padded) and k_1 <= k_2 <= ...; a zero diagonal entry is reported
    as k = n.  Pivots have minimal valuation, ties broken by lowest row and
    then lowest column.
    """
    rows = len(A)
    cols = len(A[0]) if rows else 0
    if rows == 0 or cols == 0:
        return [], [], []
    ctx = A[0][0].ctx
    n = min(x.prec for row in A for x in row)
    W = [[x.reduce(n) for x in row] for row in A]
    U = [[ctx.elem(1 if i == j else 0, n) for j in range(rows)] for i in range(rows)]
    V = [[ctx.elem(1 if i == j else 0, n) for j in range(cols)] for i in range(cols)]
    ks: list[int] = []
    for r in range(min(rows, cols)):
        best = None
        for i in range(r, rows):
            for j in range(r, cols):
                v = W[i][j].v_pi()
                if v != INF and (best is None or v < best[0]):
                    best = (v, i, j)
        if best is None:
            break
        v, i, j = best
        W[r], W[i] = W[i], W[r]
        U[r], U[i] = U[i], U[r]
        for row in W:
            row[r], row[j] = row[j], row[r]
        for row in V:
            row[r], row[j] = row[j], row[r]
        piv = W[r][r]
        unit = piv.div_pi(v).with_prec(n) if v else piv
        uinv = unit.inv()
        W[r] = [x * uinv for x in W[r]]
        U[r] = [x * uinv for x in U[r]]
        for i2 in range(rows):
            if i2 == r or W[i2][r].is_zero():
                continue
            f = W[i2][r].div_pi(v).with_prec(n) if v else W[i2][r]
            W[i2] = [a - f * b for a, b in zip(W[i2], W[r])]
            U[i2] = [a - f * b for a, b in zip(U[i2], U[r])]
        for j2 in range(cols):
            if j2 == r or W[r][j2].is_zero():
                continue
            f = W[r][j2].div_pi(v).with_prec(n) if v else W[r][j2]
            for row in W:
                row[j2] = row[j2] - f * row[r]
            for row in V:
                row[j2] = row[j2] - f * row[r]
        ks.append(v)
    ks += [n] * (min(rows, cols) - len(ks))
    return ks, U, V


def invariant_factors(A: Sequence[Sequence[OKElem]]) -> list[int]:
    return snf(A)[0]


# ----------------------------------------------------------- Z_p-level SNF


def _dtype_for(P: int):
    return np.int64 if P < 2 ** 31 else object


def zp_snf(A: np.ndarray, p: int, M: int, want_V: bool = False, want_U: bool = False):
    """Valuations of the Smith form of an integer matrix modulo p^M.

    Returns (vals, V) or (vals, V, U) with U A V = diag(p^vals) mod p^M;
    vals lists the pivot valuations (< M) in increasing order.  Pivots are
    taken level by level (all valuation-0 pivots first, then 1, ...), each
    level scanning the columns from left to right; the row and column of
    a pivot are then eliminated, touching only the nonzero entries.
    """
    P = p ** M
    dt = _dtype_for(P)
    A = np.array(A, dtype=dt) % P
    rows, cols = A.shape
    V = np.eye(cols, dtype=dt) if want_V else None
    U = np.eye(rows, dtype=dt) if want_U else None
    row_alive = np.ones(rows, dtype=bool)
    col_alive = np.ones(cols, dtype=bool)
    piv_rows: list[int] = []
    piv_cols: list[int] = []
    vals: list[int] = []
    for k in range(M):
        pk, pk1 = p ** k, p ** (k + 1)
        progress = True
        while progress:
            progress = False
            for j in np.flatnonzero(col_alive):
                alive = np.flatnonzero(row_alive)
                if alive.size == 0:
                    break
                colv = A[alive, j]
                hit = np.flatnonzero(colv % pk1)
                if hit.size == 0:
                    continue
                i = int(alive[hit[0]])
                u = int(A[i, j]) // pk
                uinv = pow(u, -1, P)
                A[i] = (A[i] * uinv) % P
                if want_U:
                    U[i] = (U[i] * uinv) % P
                # clear column j below/above the pivot
                f = colv // pk
                f[hit[0]] = 0
                nzr = np.flatnonzero(f)
                rowcols = np.flatnonzero(A[i] * col_alive)
                if nzr.size:
                    rr = alive[nzr]
                    fr = f[nzr]
                    A[np.ix_(rr, rowcols)] = (A[np.ix_(rr, rowcols)] - np.outer(fr, A[i, rowcols])) % P
                    if want_U:
                        U[rr] = (U[rr] - np.outer(fr, U[i])) % P
                # clear row i
                others = rowcols[rowcols != j]
                if want_V and others.size:
                    g = A[i, others] // pk
                    V[:, others] = (V[:, others] - np.outer(V[:, j], g)) % P
                A[i, others] = 0
                row_alive[i] = False
                col_alive[j] = False
                piv_rows.append(i)
                piv_cols.append(int(j))
                vals.append(k)
                progress = True
    rest_r = [i for i in range(rows) if row_alive[i]]
    rest_c = [j for j in range(cols) if col_alive[j]]
    if want_V:
        V = V[:, piv_cols + rest_c]
    if want_U:
        U = U[piv_rows + rest_r]
        return vals, V, U
    return vals, V


class QuotientLattice:
    """Z_p^N / (span B + p^M Z_p^N) in Smith coordinates, for measuring images.

    With U B V = diag(p^k_i), the quotient is the sum of Z/p^k_i; a column w
    maps to (U w)_i mod p^k_i.
    """

    def __init__(self, B: np.ndarray, p: int, M: int, N: int):
        self.p, self.M, self.N = p, M, N
        P = p ** M
        if B.shape[1] == 0:
            vals, U = [], np.eye(N, dtype=_dtype_for(P))
        else:
            vals, _, U = zp_snf(B, p, M, want_U=True)
        ks = list(vals) + [M] * (N - len(vals))
        self.keep = [i for i, k in enumerate(ks) if k > 0]
        self.U = U[self.keep]
        self.scale = np.array([p ** (M - ks[i]) for i in self.keep], dtype=object)
        self.length = sum(ks)

    def image_length(self, W: np.ndarray) -> int:
        """Z_p-length of (span W + B) / B."""
        if W.shape[1] == 0 or not self.keep:
            return 0
        P = self.p ** self.M
        X = (self.U.astype(object).dot(W.astype(object)) % P) * self.scale[:, None] % P
        vals, _ = zp_snf(_to_arr(X, P), self.p, self.M)
        return sum(self.M - v for v in vals)


def lattice_colength(G: np.ndarray, p: int, M: int, N: int) -> int:
    """Z_p-length of Z_p^N / (column span of G + p^M Z_p^N)."""
    if G.size == 0 or G.shape[1] == 0:
        return N * M
    vals, _ = zp_snf(G, p, M)
    return sum(vals) + (N - len(vals)) * M


def zp_kernel(A: np.ndarray, p: int, M: int) -> np.ndarray:
    """Generators (columns) of {x : A x = 0 mod p^M}."""
    rows, cols = A.shape
    P = p ** M
    if rows == 0:
        return np.eye(cols, dtype=_dtype_for(P))
    vals, V = zp_snf(A, p, M, want_V=True)
    gens = []
    for i in range(cols):
        if i < len(vals):
            if vals[i] == 0:
                continue
            gens.append((V[:, i] * p ** (M - vals[i])) % P)
        else:
            gens.append(V[:, i] % P)
    if not gens:
        return np.zeros((cols, 0), dtype=_dtype_for(P))
    return np.stack(gens, axis=1)


# ---------------------------------------------------------------- windows


@dataclass(frozen=True)
class Window:
    B_lo: int
    B_hi: int

    def __post_init__(self):
        if not self.B_lo < 0 < self.B_hi:
            raise CohomologyError("a window needs B_lo < 0 < B_hi")


def default_schedule(q: int) -> list[int]:
    s = max(1.0, q / 2)
    return [int(math.ceil(b * s)) for b in (8, 16, 32)]


@dataclass
class CohomologyResult:
    factors: dict[int, list[int]]
    stabilized: dict[int, bool]
    windows_used: list[int]
    mode: str
    history: dict[int, list[list[int]]] = field(default_factory=dict)
    lossy: bool = False
    h0_exact: list[int] | None = None
    timings: dict[int, float] = field(default_factory=dict)
    clamped: bool = False

    def lines(self) -> list[str]:
        out = []
        for i in sorted(self.factors):
            f = ",".join(str(k) for k in self.factors[i])
            out.append(f"H{i}: [{f}] stabilized={'true' if self.stabilized[i] else 'false'}")
        return out

    def report(self) -> str:
        head = [f"mode={self.mode} windows={','.join(str(b) for b in self.windows_used)}"
                f" lossy={'true' if self.lossy else 'false'} clamped={'true' if self.clamped else 'false'}"]
        if self.h0_exact is not None:
            head.append("H0_exact: [" + ",".join(str(k) for k in self.h0_exact) + "]")
        return "\n".join(head + self.lines()) + "\n"


# ----------------------------------------------------- small O-matrix tools


def _ok_rank_basis(cols: list[list[OKElem]]) -> list[int]:
    """Indices of columns independent modulo pi (greedy, left to right)."""
    if not cols:
        return []
    r = len(cols[0])
    chosen: list[int] = []
    basis: list[list[OKElem]] = []  # echelon rows mod pi
    pivots: list[int] = []
    for idx, c in enumerate(cols):
        v = [x.reduce(1) for x in c]
        for b, pv in zip(basis, pivots):
            if not v[pv].is_zero():
                f = v[pv] * b[pv].inv()
                v = [a - f * bb for a, bb in zip(v, b)]
        nz = [i for i in range(r) if not v[i].is_zero()]
        if nz:
            chosen.append(idx)
            basis.append(v)
            pivots.append(nz[0])
    return chosen


def _ok_mat_inv(A: list[list[OKElem]]) -> list[list[OKElem]]:
    """Inverse of a square matrix invertible mod pi, by Gauss-Jordan over O_K/pi^n."""
    k = len(A)
    ctx = A[0][0].ctx
    n = min(x.prec for row in A for x in row)
    W = [[x.reduce(n) for x in row] + [ctx.elem(1 if i == j else 0, n) for j in range(k)] for i, row in enumerate(A)]
    for c in range(k):
        piv = next(i for i in range(c, k) if W[i][c].is_unit())
        W[c], W[piv] = W[piv], W[c]
        inv = W[c][c].inv()
        W[c] = [x * inv for x in W[c]]
        for i in range(k):
            if i != c and not W[i][c].is_zero():
                f = W[i][c]
                W[i] = [a - f * b for a, b in zip(W[i], W[c])]
    return [row[k:] for row in W]


# ------------------------------------------------------- complex restriction


class _DeltaBasis:
    """Per-exponent basis of the Delta-invariants for a constant Delta matrix."""

    def __init__(self, M: EtaleModule):
        self.M = M
        ctx, n, q = M.ctx, M.n, M.octx.q
        self.q = q
        zeta = M.octx.zeta.reduce(n)
        D0 = [[M.Delta[i][j].coeff(0) if M.Delta[i][j].coeffs else ctx.zero(n) for j in range(M.rank)]
              for i in range(M.rank)]
        self.D0 = D0
        self.zeta = zeta
        self.cache: dict[int, tuple] = {}

    def at(self, j: int):
        key = j % (self.q - 1)
        if key in self.cache:
            return self.cache[key]
        M, r = self.M, self.M.rank
        ctx, n = M.ctx, M.n
        z = self.zeta ** key
        T = [[x * z for x in row] for row in self.D0]
        # P = (q-1)^-1 sum_k T^k
        acc = [[ctx.elem(1 if i == jj else 0, n) for jj in range(r)] for i in range(r)]
        cur = [row[:] for row in acc]
        for _ in range(self.q - 2):
            cur = [[sum((cur[i][k] * T[k][jj] for k in range(r)), ctx.zero(n)) for jj in range(r)] for i in range(r)]
            acc = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(acc, cur)]
        inv = ctx.elem(self.q - 1, n).inv()
        P = [[x * inv for x in row] for row in acc]
        cols = [[P[i][c] for i in range(r)] for c in range(r)]
        chosen = _ok_rank_basis(cols)
        B = [cols[c] for c in chosen]  # list of basis vectors (length r)
        rows_sel: list[int] = []
        if B:
            # rows R with B[R,:] invertible mod pi
            rowvecs = [[B[b][i] for b in range(len(B))] for i in range(r)]
            rows_sel = _ok_rank_basis(rowvecs)
            sq = [[B[b][i] for b in range(len(B))] for i in rows_sel]
            Linv = _ok_mat_inv(sq)
        else:
            Linv = []
        self.cache[key] = (B, rows_sel, Linv)
        return self.cache[key]


class _Space:
    """Coordinates of one degree of a restricted complex.

    Each O-coordinate is (component index, exponent, basis index); each carries
    D Z_p-coordinates (multiples by t^u).
    """

    def __init__(self, comps: list[tuple[str, ...]], ranges: list[tuple[int, int]], M: EtaleModule,
                 dbasis: _DeltaBasis | None, use_delta: bool):
        self.comps = comps
        self.ranges = ranges
        self.M = M
        self.dbasis = dbasis
        self.use_delta = use_delta
        self.ocoords: list[tuple[int, int, int]] = []
        self.index: dict[tuple[int, int, int], int] = {}
        for ci, (lo, hi) in enumerate(ranges):
            for j in range(lo, hi):
                for b in range(self._dim_at(j)):
                    self.index[(ci, j, b)] = len(self.ocoords)
                    self.ocoords.append((ci, j, b))

    def _dim_at(self, j: int) -> int:
        if self.dbasis is not None:
            return len(self.dbasis.at(j)[0])
        return self.M.rank

    @property
    def N(self) -> int:
        return len(self.ocoords) * self.M.ctx.D

    def basis_element(self, j: int, b: int) -> ModuleElem:
        M = self.M
        ctx, n = M.ctx, M.n
        if self.dbasis is not None:
            vec = self.dbasis.at(j)[0][b]
            return ModuleElem([LaurentElem(ctx, {j: c}, n) for c in vec])
        coords = [LaurentElem.zero(ctx, n) for _ in range(M.rank)]
        coords[b] = LaurentElem.monomial(ctx, j, n)
        return ModuleElem(coords)

    def coordinates(self, ci: int, m: ModuleElem, hi_cut: int) -> tuple[dict[int, OKElem], bool]:
        """O-coordinates of m placed in component ci; flags loss outside the window."""
        lo, hi = self.ranges[ci]
        out: dict[int, OKElem] = {}
        lossy = False
        exps: set[int] = set()
        for x in m.coords:
            exps.update(x.coeffs)
            if x.xprec < hi:
                lossy = True
        for j in sorted(exps):
            vec = [x.coeffs.get(j) for x in m.coords]
            if all(v is None or v.is_zero() for v in vec):
                continue
            if j < lo or j >= hi:
                if j < hi_cut:
                    lossy = True
                continue
            ctx, n = self.M.ctx, self.M.n
            vec = [v if v is not None else ctx.zero(n) for v in vec]
            if self.dbasis is not None:
                B, rows_sel, Linv = self.dbasis.at(j)
                if not B:
                    lossy = True
                    continue
                sub = [vec[i] for i in rows_sel]
                y = [sum((Linv[a][k] * sub[k] for k in range(len(sub))), ctx.zero(n)) for a in range(len(B))]
                for b, c in enumerate(y):
                    if not c.is_zero():
                        out[self.index[(ci, j, b)]] = c
            else:
                for s, c in enumerate(vec):
                    if not c.is_zero():
                        out[self.index[(ci, j, s)]] = c
        return out, lossy


@dataclass
class RestrictedComplex:
    spaces: list[_Space]
    mats: list[np.ndarray]  # Z_p matrices of the differentials (rows target, cols source)
    projectors: list[np.ndarray | None]
    lossy: bool
    p: int
    M: int
    row_scale: list[np.ndarray]
    lam: list[np.ndarray]
    pimul: list[np.ndarray]


def _zp_block(ctx: BaseField, c: OKElem, P: int) -> np.ndarray:
    """D x D integer matrix of multiplication by c in the basis 1, t, .., t^(D-1)."""
    D = ctx.D
    out = np.zeros((D, D), dtype=object)
    for u in range(D):
        tu = [0] * D
        tu[u] = 1
        prod = ctx.mul_coeffs(c.coeffs, tu)
        for w in range(D):
            out[w, u] = prod[w] % P
    return out


def _accumulate(A: np.ndarray, oi: int, col: int, c: OKElem, ctx: BaseField, P: int) -> None:
    """Add the Z_p block of multiplication by c at O-position (oi, col)."""
    D = ctx.D
    if D == 1:
        A[oi, col] = (A[oi, col] + c.coeffs[0]) % P
        return
    for u in range(D):
        tu = [0] * D
        tu[u] = 1
        cu = ctx.mul_coeffs(c.coeffs, tu)
        for w in range(D):
            A[oi * D + w, col * D + u] = (A[oi * D + w, col * D + u] + cu[w]) % P


def _coord_vectors(ctx: BaseField, c: OKElem, P: int) -> list[list[int]]:
    """Columns of the Z_p block for c (see _zp_block), computed directly."""
    return _zp_block(ctx, c, P).T.tolist()


def _component_ranges(C: CochainComplex, b: int, mode: str, hi: int) -> list[list[tuple[int, int]]]:
    M = C.module
    n, q = M.n, M.octx.q
    out = []
    for comps in C.terms:
        rr = []
        for S in comps:
            if mode == "exact":
                if "phi" in S:
                    lo = -b
                else:
                    lo = -((b - (n - 1) * (q - 1)) // q)
                    lo = min(lo, 0)
                rr.append((lo, hi))
            else:
                rr.append((-b, hi))
        out.append(rr)
    return out


def choose_mode(C: CochainComplex) -> str:
    M = C.module
    if C.kind in ("lt", "ft", "koszul", "koszul-ft") and M.is_upper():
        return "exact"
    return "projected"


def restrict_complex(C: CochainComplex, b: int, mode: str | None = None, hi: int | None = None,
                     which: Sequence[int] | None = None) -> RestrictedComplex:
    """Restrict C to the window b; `which` limits the differentials that are built."""
    M = C.module
    ctx, n = M.ctx, M.n
    mode = mode or choose_mode(C)
    if hi is None:
        hi = 1 if mode == "exact" else b
    use_delta = C.delta_projected
    const_delta = mat_is_constant(M.Delta)
    dbasis = _DeltaBasis(M) if (use_delta and const_delta) else None
    ranges = _component_ranges(C, b, mode, hi)
    span = max((h - lo for rr in ranges for (lo, h) in rr), default=0)
    M.octx.reserve_gamma(span)
    spaces = [_Space(C.terms[i], ranges[i], M, dbasis, use_delta) for i in range(len(C.terms))]
    p, Mx = ctx.p, ctx.abs_prec(n)
    P = p ** Mx
    D = ctx.D
    lossy = False
    mats = []
    for i, blk in enumerate(C.differentials):
        src, tgt = spaces[i], spaces[i + 1]
        if which is not None and i not in which:
            mats.append(None)
            continue
        A = np.zeros((tgt.N, src.N), dtype=object)
        for col, (ci, j, bidx) in enumerate(src.ocoords):
            x = src.basis_element(j, bidx)
            if dbasis is None and use_delta:
                x = M.delta_project(x, cap=hi)
            for ri, row in enumerate(blk):
                op = row[ci]
                if op.is_zero():
                    continue
                y = op.evaluate(M, x, cap=hi)
                coords, lz = tgt.coordinates(ri, y, hi)
                lossy |= lz
                for oi, c in coords.items():
                    _accumulate(A, oi, col, c, ctx, P)
        mats.append(A)
    projectors: list[np.ndarray | None] = []
    for sp in spaces:
        if use_delta and dbasis is None:
            projectors.append(_projector_matrix(sp, M, hi))
        else:
            projectors.append(None)
    row_scale = []
    lam = []
    pimul = []
    pi_hi = ctx.pi(ctx.e * Mx)
    for sp in spaces:
        nO = len(sp.ocoords)
        sc = np.array([p ** (Mx - _m_u(ctx, n, w)) for _ in range(nO) for w in range(D)], dtype=object)
        row_scale.append(sc)
        lam.append(np.array([p ** _m_u(ctx, n, w) for _ in range(nO) for w in range(D)], dtype=object))
        blk = _zp_block(ctx, pi_hi, P)
        pimul.append(blk)
    return RestrictedComplex(spaces, mats, projectors, lossy, p, Mx, row_scale, lam, pimul)


def _m_u(ctx: BaseField, n: int, u: int) -> int:
    # pi^n O_K is p^(m_u) in the coordinate of t^u
    if ctx.family == "unramified":
        return n
    return max(-(-(n - u) // ctx.e), 0)


def _projector_matrix(sp: _Space, M: EtaleModule, hi: int) -> np.ndarray:
    ctx = M.ctx
    P = ctx.p ** ctx.abs_prec(M.n)
    A = np.zeros((sp.N, sp.N), dtype=object)
    for col, (ci, j, b) in enumerate(sp.ocoords):
        x = M.delta_project(sp.basis_element(j, b), cap=hi)
        coords, _ = sp.coordinates(ci, x, hi)
        for oi, c in coords.items():
            _accumulate(A, oi, col, c, ctx, P)
    return A


# -------------------------------------------------------------- homology


def _blockdiag_apply(blk: np.ndarray, G: np.ndarray, D: int, P: int) -> np.ndarray:
    """Apply the same D x D block to every O-coordinate of the columns of G."""
    if G.shape[1] == 0:
        return G
    N = G.shape[0]
    H = G.reshape(N // D, D, G.shape[1]).astype(object)
    out = np.einsum("wu,kuc->kwc", blk.astype(object), H)
    return (out.reshape(N, G.shape[1])) % P


def _to_arr(A: np.ndarray, P: int) -> np.ndarray:
    dt = _dtype_for(P)
    return np.array(A % P if A.size else A, dtype=dt)


def _embed(G: np.ndarray, inner: list[int], N: int) -> np.ndarray:
    out = np.zeros((N, G.shape[1]), dtype=object)
    if G.shape[1]:
        out[inner, :] = G
    return out


def _homology_lengths(R_in: RestrictedComplex, R_amb: RestrictedComplex, i: int, n: int, ctx: BaseField) -> list[int]:
    """Counts c_j = #{invariant factors with exponent > j} of the image of H^i(inner) in H^i(ambient)."""
    p, Mx = R_amb.p, R_amb.M
    P = p ** Mx
    D = ctx.D
    amb = R_amb.spaces[i]
    inn = R_in.spaces[i]
    N = amb.N
    # inner coordinates inside the ambient ones
    inner_idx = []
    for (ci, j, b) in inn.ocoords:
        oi = amb.index[(ci, j, b)]
        inner_idx.extend(range(oi * D, oi * D + D))
    # cycles of the inner window
    if i < len(R_in.mats):
        A = R_in.mats[i]
        sc = R_in.row_scale[i + 1]
        As = (A * sc[:, None]) % P if A.size else A
        K = zp_kernel(_to_arr(As, P), p, Mx)
        Z = _embed(K.astype(object), inner_idx, N)
    else:
        Z = _embed(np.eye(len(inner_idx), dtype=object), inner_idx, N)
    proj = R_amb.projectors[i]
    if proj is not None:
        Z = (proj.dot(Z)) % P if Z.shape[1] else Z
    # boundaries of the ambient window plus pi^n
    lam = np.diag(R_amb.lam[i]).astype(object)
    if i > 0:
        Bd = R_amb.mats[i - 1]
        projp = R_amb.projectors[i - 1]
        if projp is not None:
            Bd = Bd.dot(projp) % P
        B = np.concatenate([Bd.astype(object), lam], axis=1)
    else:
        B = lam
    Q = QuotientLattice(_to_arr(B, P), p, Mx, N)
    out = []
    cur = Z
    r_len = ctx.r
    for j in range(n + 1):
        ell = Q.image_length(cur)
        if ell % r_len:
            raise PrecisionUnderflow("length not divisible by the residue degree")
        out.append(ell // r_len)
        cur = _blockdiag_apply(R_amb.pimul[i], cur, D, P)
    return out


def _factors_from_lengths(ell: list[int], n: int) -> list[int]:
    counts = [ell[j] - ell[j + 1] for j in range(n)]  # counts[j] = #{k > j}
    counts.append(0)
    fac = []
    for k in range(n, 0, -1):
        num = counts[k - 1] - counts[k]
        if num < 0:
            raise PrecisionUnderflow("inconsistent lengths")
        fac.extend([k] * num)
    return fac


MAX_AMBIENT = 8192


def ambient_factor(C: CochainComplex, mode: str) -> int:
    """Ratio between the ambient and the inner window.

    A cycle near X^(-b) can be the boundary of an element whose exponents
    are lower by a factor growing like q per pi-adic digit when d >= 2; for
    d = 1 a factor q is enough in practice.  Projected mode is lossy anyway
    and uses 2.
    """
    M = C.module
    q, n, d = M.octx.q, M.n, M.octx.d
    if mode != "exact":
        return 2
    if d <= 1:
        return max(2, q)
    return 2 * q ** n


def windowed_cohomology(C: CochainComplex, b: int, mode: str | None = None,
                        degrees: Sequence[int] | None = None,
                        factor: int | None = None,
                        max_ambient: int | None = MAX_AMBIENT) -> tuple[dict[int, list[int]], bool, bool]:
    """Image of H^i(window b) in H^i(window f b); returns (factors, lossy, clamped)."""
    mode = mode or choose_mode(C)
    M = C.module
    f = factor or ambient_factor(C, mode)
    amb = f * b
    clamped = False
    if max_ambient is not None and amb > max_ambient:
        amb = max(max_ambient, 2 * b)
        clamped = True
    degs = list(range(len(C.terms)) if degrees is None else degrees)
    need_in = [i for i in degs if i < len(C.differentials)]
    need_amb = [i - 1 for i in degs if i > 0]
    R_in = restrict_complex(C, b, mode, which=need_in)
    if not need_amb and mode == "exact":
        # only H^0 requested: no boundaries, so the inner window is its own ambient
        R_amb, clamped = R_in, False
    else:
        R_amb = restrict_complex(C, amb, mode, which=need_amb)
    out = {}
    for i in degs:
        ell = _homology_lengths(R_in, R_amb, i, M.n, M.ctx)
        out[i] = _factors_from_lengths(ell, M.n)
    return out, (R_in.lossy or R_amb.lossy), clamped


def complex_cohomology(C: CochainComplex, schedule: Sequence[int] | None = None, n: int | None = None,
                       mode: str | None = None, degrees: Sequence[int] | None = None,
                       exact_h0: bool = True, ambient: int | None = None,
                       max_ambient: int | None = MAX_AMBIENT) -> CohomologyResult:
    M = C.module
    if n is not None and n != M.n:
        raise CohomologyError("the module precision and the requested n differ")
    schedule = list(schedule) if schedule is not None else default_schedule(M.octx.q)
    if len(schedule) < 3 or any(a >= b for a, b in zip(schedule, schedule[1:])):
        raise CohomologyError("schedule must be strictly increasing with at least 3 windows")
    mode = mode or choose_mode(C)
    hist: dict[int, list[list[int]]] = {}
    lossy = False
    timings = {}
    clamped = False
    for b in schedule:
        t0 = time.perf_counter()
        res, lz, cl = windowed_cohomology(C, b, mode, degrees, factor=ambient, max_ambient=max_ambient)
        timings[b] = time.perf_counter() - t0
        lossy |= lz
        clamped |= cl
        for i, f in res.items():
            hist.setdefault(i, []).append(f)
    factors = {i: h[-1] for i, h in hist.items()}
    stab = {i: all(x == h[-1] for x in h[-3:]) for i, h in hist.items()}
    if clamped:
        # degrees >= 2 can carry classes that only die in a wider ambient
        stab = {i: s and i < 2 for i, s in stab.items()}
    h0 = None
    if exact_h0 and 0 in factors:
        try:
            h0 = h0_exact(C)
        except NoCertificate:
            h0 = None
    return CohomologyResult(factors, stab, schedule, mode, hist, lossy, h0, timings, clamped)


# ------------------------------------------------------------------ exact H0


def _const_term(x: LaurentElem, ctx, n) -> OKElem:
    return x.coeffs.get(0, ctx.zero(n))


def h0_exact(C: CochainComplex) -> list[int]:
    """H^0 for phi-type complexes on upper modules with Phi(0) invertible mod pi.

    Then a solution of phi_M x = x has no negative exponents modulo X O[[X]]
    (the lowest negative term would be pushed q times lower with a unit
    coefficient), so H^0 is the joint kernel on constants of Phi(0) - 1,
    A_g(0) - 1, Delta(0) - 1 (and B(0) - 1 in the False-Tate case).
    """
    M = C.module
    ctx, n, r = M.ctx, M.n, M.rank
    if C.kind not in ("lt", "ft") or not M.is_upper():
        raise NoCertificate("no leading-term certificate for this complex")
    Phi0 = [[_const_term(x, ctx, n) for x in row] for row in M.Phi]
    det_mod_pi = _ok_rank_basis([[Phi0[i][j] for i in range(r)] for j in range(r)])
    if len(det_mod_pi) < r:
        raise NoCertificate("Phi(0) is not invertible mod pi")
    mats = [M.Phi] + list(M.Gamma)
    if C.delta_projected:
        mats.append(M.Delta)
    if C.kind == "ft" and M.GammaTilde is not None:
        mats.append(M.GammaTilde)
    rows: list[list[OKElem]] = []
    for A in mats:
        for i in range(r):
            rows.append([_const_term(A[i][j], ctx, n) - (1 if i == j else 0) for j in range(r)])
    return _kernel_factors(rows, r, ctx, n)


def _kernel_factors(rows: list[list[OKElem]], r: int, ctx, n: int) -> list[int]:
    """Invariant factors of {x in (O/pi^n)^r : A x = 0}."""
    ks, U, V = snf(rows)
    fac = []
    for i in range(r):
        k = ks[i] if i < len(ks) else 0
        # the kernel of multiplication by pi^k on O/pi^n is pi^(n-k) O/pi^n ~ O/pi^k
        size = k if i < len(ks) else n
        if size > 0:
            fac.append(min(size, n))
    return sorted(fac, reverse=True)


# ------------------------------------------------------------ H0 injectivity


def h0_generators(C: CochainComplex, b: int) -> list[ModuleElem]:
    """Module elements generating the windowed H^0 (window b, exact mode)."""
    M = C.module
    R = restrict_complex(C, b)
    sp = R.spaces[0]
    p, Mx = R.p, R.M
    P = p ** Mx
    D = M.ctx.D
    A = R.mats[0]
    sc = R.row_scale[1]
    K = zp_kernel(_to_arr((A * sc[:, None]) % P, P), p, Mx)
    out = []
    for c in range(K.shape[1]):
        coords = [dict() for _ in range(M.rank)]
        for oi, (ci, j, bidx) in enumerate(sp.ocoords):
            vec = [int(K[oi * D + w, c]) for w in range(D)]
            if not any(vec):
                continue
            y = M.ctx.elem(vec, M.n)
            if sp.dbasis is not None:
                B = sp.dbasis.at(j)[0][bidx]
                for s in range(M.rank):
                    t = B[s] * y
                    coords[s][j] = coords[s][j] + t if j in coords[s] else t
            else:
                coords[bidx][j] = coords[bidx][j] + y if j in coords[bidx] else y
        out.append(ModuleElem([LaurentElem(M.ctx, cs, M.n) for cs in coords]))
    return out


def h0_map_injective(F: ChainMap, b: int) -> tuple[bool, list[int], list[int]]:
    """Check that the chain map sends the windowed H^0 of its source injectively into H^0 of its target.

    The generators of ker d_0 are pushed through the degree-0 block (exactly),
    checked to be cycles of the target complex, and the invariant factors of
    their span before and after are compared.
    """
    src, tgt = F.source, F.target
    M = src.module
    gens = h0_generators(src, b)
    ctx, n = M.ctx, M.n
    images = []
    for g in gens:
        y = F.apply(0, [g])[0]
        z = tgt.apply_differential(0, [y], cap=1)
        for m in z:
            for c in m.coords:
                for k, v in c.coeffs.items():
                    if k < 1 and not v.is_zero():
                        return False, [], []
        images.append(y)
    before = _span_factors(gens, ctx, n)
    after = _span_factors(images, ctx, n)
    return before == after, before, after


def _span_factors(elems: list[ModuleElem], ctx, n) -> list[int]:
    if not elems:
        return []
    keys = sorted({(s, k) for e in elems for s, c in enumerate(e.coords) for k in c.coeffs if k < 1})
    if not keys:
        return []
    rows = [[e.coords[s].coeffs.get(k, ctx.zero(n)) for e in elems] for (s, k) in keys]
    ks, _, _ = snf(rows)
    return sorted([n - k for k in ks if k < n], reverse=True)


# -------------------------------------------------------------- psi / Iwasawa


@dataclass
class PsiResult:
    kernel: list[int]
    cokernel: list[int]
    kernel_stabilized: bool
    cokernel_stabilized: bool
    core_iterations: int
    history: list[tuple[list[int], list[int]]]
    constants_in_kernel: bool


def _psi_stable_lower(M: EtaleModule, b: int) -> int:
    """A lower bound lo <= -b with psi_M(X^j e) >= lo for every j >= lo."""
    lo = -b
    for _ in range(64):
        worst = lo
        for s in range(M.rank):
            coords = [LaurentElem.zero(M.ctx, M.n) for _ in range(M.rank)]
            coords[s] = LaurentElem.monomial(M.ctx, lo, M.n)
            y = M.psi_M(ModuleElem(coords))
            for c in y.coords:
                if c.coeffs:
                    worst = min(worst, c.val)
        if worst >= lo:
            return lo
        lo = worst
    raise CohomologyError("could not find a psi-stable window")


def _psi_window_matrix(M: EtaleModule, lo: int, hi: int, sp: _Space, shift_one: bool) -> tuple[np.ndarray, bool]:
    ctx = M.ctx
    P = ctx.p ** ctx.abs_prec(M.n)
    A = np.zeros((sp.N, sp.N), dtype=object)
    lossy = False
    for col, (ci, j, b) in enumerate(sp.ocoords):
        x = sp.basis_element(j, b)
        y = M.psi_M(x)
        if shift_one:
            y = y - x
        coords, lz = sp.coordinates(0, y, INF)
        lossy |= lz
        for oi, c in coords.items():
            _accumulate(A, oi, col, c, ctx, P)
    return A, lossy


def psi_fixed_and_coker(M: EtaleModule, schedule: Sequence[int] | None = None) -> PsiResult:
    """ker(psi - 1) and coker(psi - 1) on psi-stable windows [lo, hi).

    The kernel is exact on each window (the window is psi-stable), and every
    fixed vector lies in the psi-stable core of the window.  The cokernel is
    reported as the image of coker on the window b in coker on the window 2b.
    """
    ctx, n = M.ctx, M.n
    schedule = list(schedule) if schedule is not None else default_schedule(M.octx.q)
    p, Mx = ctx.p, ctx.abs_prec(n)
    P = p ** Mx
    D = ctx.D
    hist = []
    iters = 0
    for b in schedule:
        lo_in, hi_in = _psi_stable_lower(M, b), b
        lo_amb, hi_amb = _psi_stable_lower(M, 2 * b), 2 * b
        sp_in = _Space([()], [(lo_in, hi_in)], M, None, False)
        sp_amb = _Space([()], [(lo_amb, hi_amb)], M, None, False)
        A_in, _ = _psi_window_matrix(M, lo_in, hi_in, sp_in, True)
        A_amb, _ = _psi_window_matrix(M, lo_amb, hi_amb, sp_amb, True)
        sc = np.array([p ** (Mx - _m_u(ctx, n, w)) for _ in sp_in.ocoords for w in range(D)], dtype=object)
        K = zp_kernel(_to_arr((A_in * sc[:, None]) % P, P), p, Mx)
        lam_in = np.diag([p ** _m_u(ctx, n, w) for _ in sp_in.ocoords for w in range(D)]).astype(object)
        N_in = sp_in.N
        # kernel structure via pi-multiples
        pim = _zp_block(ctx, ctx.pi(ctx.e * Mx), P)
        ells = []
        cur = K.astype(object)
        lam_len = lattice_colength(_to_arr(lam_in, P), p, Mx, N_in)
        for j in range(n + 1):
            L = np.concatenate([cur, lam_in], axis=1)
            ells.append((lam_len - lattice_colength(_to_arr(L, P), p, Mx, N_in)) // ctx.r)
            cur = _blockdiag_apply(pim, cur, D, P)
        kfac = _factors_from_lengths(ells, n)
        # cokernel image
        N = sp_amb.N
        inner_idx = []
        for (ci, j, bb) in sp_in.ocoords:
            oi = sp_amb.index[(0, j, bb)]
            inner_idx.extend(range(oi * D, oi * D + D))
        Z = _embed(np.eye(len(inner_idx), dtype=object), inner_idx, N)
        lam = np.diag([p ** _m_u(ctx, n, w) for _ in sp_amb.ocoords for w in range(D)]).astype(object)
        B = np.concatenate([A_amb, lam], axis=1)
        lenB = lattice_colength(_to_arr(B, P), p, Mx, N)
        cells = []
        cur = Z
        for j in range(n + 1):
            L = np.concatenate([cur, B], axis=1)
            cells.append((lenB - lattice_colength(_to_arr(L, P), p, Mx, N)) // ctx.r)
            cur = _blockdiag_apply(pim, cur, D, P)
        cfac = _factors_from_lengths(cells, n)
        hist.append((kfac, cfac))
        iters = max(iters, _core_iterations(M, sp_in, lo_in, hi_in))
    kst = all(h[0] == hist[-1][0] for h in hist[-3:])
    cst = all(h[1] == hist[-1][1] for h in hist[-3:])
    const = _constants_fixed(M)
    return PsiResult(hist[-1][0], hist[-1][1], kst, cst, iters, hist, const)


def _core_iterations(M: EtaleModule, sp: _Space, lo: int, hi: int) -> int:
    """Iterations of psi on the window lattice until the image lattice stops shrinking."""
    ctx, n = M.ctx, M.n
    p, Mx = ctx.p, ctx.abs_prec(n)
    P = p ** Mx
    D = ctx.D
    A, _ = _psi_window_matrix(M, lo, hi, sp, False)
    lam = np.diag([p ** _m_u(ctx, n, w) for _ in sp.ocoords for w in range(D)]).astype(object)
    N = sp.N
    cur = np.eye(N, dtype=object)
    prev = None
    for k in range(64):
        L = np.concatenate([cur, lam], axis=1)
        ln = lattice_colength(_to_arr(L, P), p, Mx, N)
        if prev is not None and ln == prev:
            return k
        prev = ln
        cur = A.dot(cur) % P
    return 64


def _constants_fixed(M: EtaleModule) -> bool:
    """Whether some nonzero constant vector is fixed by psi_M (checked on the basis mod pi)."""
    ctx, n = M.ctx, M.n
    cols = []
    for s in range(M.rank):
        coords = [LaurentElem.zero(ctx, n) for _ in range(M.rank)]
        coords[s] = LaurentElem.constant(1, ctx, n)
        x = ModuleElem(coords)
        y = M.psi_M(x) - x
        cols.append(y)
    keys = sorted({(s, k) for y in cols for s, c in enumerate(y.coords) for k in c.coeffs})
    if not keys:
        return True
    mat = [[y.coords[s].coeffs.get(k, ctx.zero(n)) for y in cols] for (s, k) in keys]
    ks, _, _ = snf(mat)
    return any(k > 0 for k in ks) or len(ks) < M.rank


# ----------------------------------------------------------- window_restrict


def window_restrict(op: OperatorExpr, M: EtaleModule, W_in: Window) -> tuple[list[list[OKElem]], Window, bool]:
    """Matrix of op on the basis X^j e_s (B_lo <= j < B_hi) with rows in the output window.

    The output window widens per operator reach: phi needs B_hi q + q, gamma
    keeps B_hi (its tail is truncated there), psi contracts to ceil(B_hi/q)
    plus slack.  The lossy flag reports computed coefficients outside W_out.
    """
    ctx, n, q = M.ctx, M.n, M.octx.q
    atoms = op.atoms()
    hi = W_in.B_hi
    lo = W_in.B_lo
    if ("phi",) in atoms:
        hi_out = hi * q + q
        lo_out = q * lo - (n - 1) * (q - 1)
    elif ("psi",) in atoms:
        hi_out = max(hi, -(-hi // q) + 2)
        lo_out = lo
    else:
        hi_out = hi
        lo_out = lo
    W_out = Window(min(lo_out, -1), max(hi_out, 1))
    cols = []
    lossy = False
    for j in range(W_in.B_lo, W_in.B_hi):
        for s in range(M.rank):
            coords = [LaurentElem.zero(ctx, n) for _ in range(M.rank)]
            coords[s] = LaurentElem.monomial(ctx, j, n)
            y = op.evaluate(M, ModuleElem(coords), cap=W_out.B_hi)
            col = []
            for k in range(W_out.B_lo, W_out.B_hi):
                for t in range(M.rank):
                    c = y.coords[t]
                    col.append(c.coeffs.get(k, ctx.zero(n)) if k < c.xprec else ctx.zero(n))
            for t in range(M.rank):
                c = y.coords[t]
                if any(k < W_out.B_lo or (k >= W_out.B_hi and k < c.xprec) for k in c.coeffs):
                    lossy = True
            cols.append(col)
    rows = [list(r) for r in zip(*cols)] if cols else []
    return rows, W_out, lossy
