"""The Lubin-Tate formal group of f(X) = pi X + X^q.

The group law F, the endomorphisms [a]_F and the invariant differential
lambda'(X) dX are all found degree by degree from the commutation relation
with f.  In degree k the unknown coefficient enters as (pi^k - pi) c_k, a unit
times pi, so each step divides by pi once.  That division is exact but costs
one digit along chains of degree multiplications by q, so the work is done at
a slightly higher pi-precision and truncated at the end.
"""

from __future__ import annotations

from collections.abc import Sequence
from math import comb

import numpy as np

from . import _dense
from .okring import INF, BaseField, OKElem
from .series import LaurentElem, MultiSeries, l_inv


def working_precision(ctx: BaseField, n: int, degree: int) -> int:
    """pi-precision that leaves n correct digits after solving up to `degree`."""
    q = ctx.q
    chain = 0
    k = 1
    while k < max(degree, 2):
        k *= q
        chain += 1
    return n + chain + 2


def _pi_powers(ctx: BaseField, upto: int, prec: int) -> list[OKElem]:
    out = [ctx.one(prec)]
    pi = ctx.pi(prec)
    for _ in range(upto):
        out.append(out[-1] * pi)
    return out


def _solve_coefficient(rhs_minus_lhs: OKElem, k: int, pipow: list[OKElem], prec: int) -> OKElem:
    # (pi^k - pi) c = E  =>  c = (E / pi) / (pi^(k-1) - 1)
    quotient = rhs_minus_lhs.div_pi(1).with_prec(prec)
    return quotient * (pipow[k - 1] - 1).inv()


class FormalGroup:
    """F(X, Y) to total degree < deg_prec, with endomorphism and differential caches."""

    def __init__(self, ctx: BaseField, deg_prec: int, n: int):
        if deg_prec < 2:
            raise ValueError("total degree precision must be at least 2")
        self.ctx = ctx
        self.deg_prec = deg_prec
        self.n = n
        self.work = working_precision(ctx, n, deg_prec)
        self.endo_cache: dict[tuple, LaurentElem] = {}
        self._lambda: LaurentElem | None = None
        self._G: LaurentElem | None = None
        self.F = self._build()

    # ------------------------------------------------------------------
    def _build(self) -> MultiSeries:
        ctx, W, Dp, q = self.ctx, self.work, self.deg_prec, self.ctx.q
        pipow = _pi_powers(ctx, Dp + 1, W)
        coeffs: dict[tuple[int, int], OKElem] = {(1, 0): ctx.one(W), (0, 1): ctx.one(W)}
        Fq: MultiSeries | None = None
        fq_valid = 0
        for k in range(2, Dp):
            if k - q + 1 >= 1 and k > fq_valid:
                known = MultiSeries(ctx, 2, coeffs, Dp, W)
                Fq = known ** q
                # [F^q]_k only involves F_j with j <= k - q + 1
                fq_valid = k + q - 2
            for a in range(k + 1):
                b = k - a
                rhs = Fq.coeff(a, b) if Fq is not None else ctx.zero(W)
                lhs = ctx.zero(W)
                # F_j(f(X), f(Y)) in degree k: choose m1 (resp. m2) factors X^q from f(X)^i
                for m1 in range(0, a // (q - 1) + 1 if q > 1 else 1):
                    i = a - m1 * (q - 1)
                    if i < m1:
                        continue
                    for m2 in range(0, b // (q - 1) + 1):
                        j = b - m2 * (q - 1)
                        if j < m2 or m1 + m2 == 0:
                            continue
                        c = coeffs.get((i, j))
                        if c is None:
                            continue
                        lhs = lhs + c * pipow[i - m1 + j - m2] * (comb(i, m1) * comb(j, m2))
                val = _solve_coefficient(rhs - lhs, k, pipow, W)
                if not val.is_zero():
                    coeffs[(a, b)] = val
        return MultiSeries(ctx, 2, coeffs, Dp, self.n)

    # ------------------------------------------------------------------
    def endomorphism(self, a: OKElem | int, xprec: int) -> LaurentElem:
        """[a]_F(X) known modulo X^xprec and pi^n.

        The representative of ``a`` is taken as the exact element, so callers
        pass a at (at least) the working precision of the group.
        """
        ctx = self.ctx
        if isinstance(a, int):
            a = ctx.elem(a, self.work)
        key = (tuple(a.coeffs), a.prec, xprec)
        hit = self.endo_cache.get(key)
        if hit is not None:
            return hit
        for (coeffs, prec, xp), val in self.endo_cache.items():
            if coeffs == key[0] and prec == key[1] and xp >= xprec:
                return val.truncate(xprec)
        res = _endomorphism(ctx, a, xprec, self.n)
        self.endo_cache[key] = res
        return res

    def lambda_prime(self, xprec: int) -> LaurentElem:
        """lambda'(X) = (dF/dY(X, 0))^(-1) modulo X^xprec."""
        if self._lambda is not None and self._lambda.xprec >= xprec:
            return self._lambda.truncate(xprec)
        G = self.dF_dY(xprec)
        lam = l_inv(G, xprec)
        self._lambda = lam
        return lam

    def dF_dY(self, xprec: int) -> LaurentElem:
        """G(X) = dF/dY(X, 0), from pi G(f(X)) = f'(X) G(X); no pi-division occurs."""
        if self._G is not None and self._G.xprec >= xprec:
            return self._G.truncate(xprec)
        ctx, n, q = self.ctx, self.n, self.ctx.q
        pipow = _pi_powers(ctx, xprec + 1, n)
        qpi = ctx.q_over_pi(n)
        g: list[OKElem] = [ctx.one(n)]
        for k in range(1, xprec):
            acc = ctx.zero(n)
            m = 1
            while True:
                i = k - m * (q - 1)
                if i < m:
                    break
                acc = acc + g[i] * pipow[i - m] * comb(i, m)
                m += 1
            if k - q + 1 >= 0:
                acc = acc - qpi * g[k - q + 1]
            g.append(acc * (1 - pipow[k]).inv())
        G = LaurentElem(ctx, dict(enumerate(g)), n, xprec)
        self._G = G
        return G

    def lt_pi(self, xprec=INF) -> LaurentElem:
        """[pi]_F = f(X) = pi X + X^q (exact)."""
        ctx = self.ctx
        f = LaurentElem(ctx, {1: ctx.pi(self.n), ctx.q: 1}, self.n)
        return f.truncate(xprec)


def _mult_matrix(ctx: BaseField, c: Sequence[int], P: int) -> np.ndarray:
    """D x D matrix whose column u holds c * t^u (exact reduction by g, then mod P)."""
    D = ctx.D
    cols = []
    for u in range(D):
        tu = [0] * D
        tu[u] = 1
        cols.append([x % P for x in ctx.mul_coeffs(list(c), tu)])
    return np.array(cols, dtype=object).T


def _endomorphism(ctx: BaseField, a: OKElem, xprec: int, n: int) -> LaurentElem:
    q = ctx.q
    W = working_precision(ctx, n, xprec)
    a = a.with_prec(W) if a.prec >= W else OKElem(ctx, a.coeffs, W)
    K = max(int(xprec), 2)
    D = ctx.D
    P_mod = ctx.p ** ctx.abs_prec(W)
    obj = _dense._use_object(ctx, W, K)
    dt = object if obj else np.int64
    pipow = _pi_powers(ctx, K + 1, W)
    piv = np.array([x.coeffs for x in pipow], dtype=dt)
    c: list[OKElem] = [ctx.zero(W), a]
    dense = np.zeros((K, D), dtype=dt)
    dense[1] = a.coeffs
    # lhs[k]: the part of [a](f(X)) in degree k coming from c_i f(X)^i with i < k
    lhs = np.zeros((K, D), dtype=dt)
    mmax = (K - 1) // (q - 1) + 1
    binom = np.zeros(mmax + 1, dtype=dt)  # row i of Pascal's triangle mod P, entries m <= mmax
    binom[0] = 1
    binom_i = 0

    def spread(i: int, ci: OKElem) -> None:
        # add c_i * C(i, m) * pi^(i - m) at degree i + m (q - 1), m >= 1
        nonlocal binom_i
        while binom_i < i:
            binom[1:] = (binom[1:] + binom[:-1]) % P_mod
            binom_i += 1
        top = min(i, (K - 1 - i) // (q - 1))
        if top < 1 or ci.is_zero():
            return
        ms = np.arange(1, top + 1)
        coef = piv[i - ms]
        if D == 1:
            vals = (coef[:, 0] * binom[1: top + 1]) % P_mod
            vals = (vals * ci.coeffs[0]) % P_mod
            lhs[i + ms * (q - 1), 0] = (lhs[i + ms * (q - 1), 0] + vals) % P_mod
            return
        scaled = (coef * binom[1: top + 1, None]) % P_mod
        Mc = _mult_matrix(ctx, ci.coeffs, P_mod).astype(dt)
        vals = scaled.dot(Mc.T) % P_mod
        idx = i + ms * (q - 1)
        lhs[idx] = (lhs[idx] + vals) % P_mod

    spread(1, a)
    Pw: np.ndarray | None = None
    valid = 0
    for k in range(2, K):
        if k - q + 1 >= 1 and k > valid:
            known = dense[: k - q + 2].copy()
            Pw = _dense.power(ctx, known, q, W, K)
            valid = k + q - 2
        rhs = ctx.zero(W)
        if Pw is not None and k < len(Pw):
            rhs = OKElem(ctx, tuple(int(x) for x in Pw[k]), W)
        lk = OKElem(ctx, tuple(int(x) for x in lhs[k]), W)
        ck = _solve_coefficient(rhs - lk, k, pipow, W)
        c.append(ck)
        dense[k] = ck.coeffs
        spread(k, ck)
    out = {k: v.reduce(n) for k, v in enumerate(c) if k < xprec}
    return LaurentElem(ctx, out, n, xprec)


def build_group_law(ctx: BaseField, deg_prec: int, n: int = 3) -> FormalGroup:
    return FormalGroup(ctx, deg_prec, n)


def endomorphism(G: FormalGroup, a: OKElem | int, xprec: int) -> LaurentElem:
    return G.endomorphism(a, xprec)


def invariant_dlog(G: FormalGroup, xprec: int | None = None) -> LaurentElem:
    return G.lambda_prime(xprec if xprec is not None else G.deg_prec - 1)
