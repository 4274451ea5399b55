"""phi_q, the Gamma_LT action, the decomposition over phi_q(O_E), traces and psi_q.

phi_q substitutes [pi](X) = pi X + X^q and is O_K-linear.  gamma_a substitutes
[a]_F(X).  O_E is free over phi_q(O_E) with basis 1, X, ..., X^(q-1); the
trace of X over phi_q(O_E) comes from the characteristic polynomial
T^q + pi T - phi(X), and psi_q is (1/pi) times the trace, pulled back by phi.

Windows: phi maps an unknown tail starting at exponent T to a tail starting at
``phi_window(T)``; gamma keeps the tail start; the decomposition lowers it
roughly by a factor q (``decompose_window``).
"""

from __future__ import annotations

from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from . import _dense
from .formalgroup import FormalGroup
from .okring import INF, BaseField, OKElem, OKError, teichmuller
from .series import LaurentElem, SeriesError


class WindowExhausted(SeriesError):
    pass


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def phi_window(T, q: int, m: int):
    """Lowest exponent that phi can produce (mod pi^m) from exponents >= T."""
    if T == INF:
        return INF
    if T < 0:
        return q * T - (m - 1) * (q - 1)
    if T <= m - 1:
        return T
    return T + (T - m + 1) * (q - 1)


def decompose_window(T, q: int, n: int):
    """Every phi-coordinate of an element whose unknown tail starts at T is known below this."""
    if T == INF:
        return INF
    L = T
    S = INF
    for r in range(n):
        s = _ceil_div(L - (q - 1), q)
        S = min(S, s)
        L = min(L, phi_window(s, q, n - r))
    return S


def default_generators(ctx: BaseField, prec: int) -> list[OKElem]:
    """Units a_1..a_d with log(a_i) spanning pi O_K over Z_p."""
    if ctx.family == "unramified":
        out = []
        for i in range(ctx.r):
            c = [0] * ctx.D
            c[i] = ctx.p
            c[0] += 1
            out.append(ctx.elem(c, prec))
        return out
    pi = ctx.pi(prec)
    return [ctx.one(prec) + pi ** i for i in range(1, ctx.e + 1)]


class OperatorContext:
    """Base field, formal group, generators of Gamma*_LT and Delta, trace table."""

    def __init__(self, ctx: BaseField, n: int, gens: Sequence[OKElem] | None = None,
                 zeta: OKElem | None = None, group_degree: int = 8):
        self.ctx = ctx
        self.n = n
        self.q = ctx.q
        self.hi_prec = n + 64
        self.group = FormalGroup(ctx, group_degree, n)
        if gens is None:
            gens = default_generators(ctx, self.hi_prec)
        self.gamma_gens = [g if g.prec >= self.hi_prec else OKElem(ctx, g.coeffs, self.hi_prec) for g in gens]
        for a in self.gamma_gens:
            if not (a - 1).reduce(1).is_zero():
                raise OKError("Gamma* generators must be congruent to 1 mod pi")
        if zeta is None:
            zeta = teichmuller(ctx, ctx.residue_generator(), self.hi_prec)
        self.zeta = zeta
        self.q_over_pi = ctx.q_over_pi(n)
        self.trace_table = trace_table(ctx, n + 1)
        self._trace_over_pi = []
        for t in self.trace_table:
            if t.v_pi() < 1:
                raise OKError("trace is not divisible by pi")
            self._trace_over_pi.append(t.div_pi(1).reduce(n))
        self._gamma_tables: dict[tuple, "_PowerTable"] = {}

    @property
    def d(self) -> int:
        return len(self.gamma_gens)

    def __repr__(self) -> str:
        return f"OperatorContext({self.ctx}, n={self.n}, d={self.d})"

    def lift(self, a: OKElem | int) -> OKElem:
        if isinstance(a, int):
            return self.ctx.elem(a, self.hi_prec)
        if a.prec >= self.hi_prec:
            return a
        return OKElem(self.ctx, a.coeffs, self.hi_prec)

    def is_teichmuller(self, a: OKElem) -> bool:
        return (a ** (self.q - 1)).is_one()

    # ------------------------------------------------------------------ phi
    def phi_monomial(self, j: int) -> dict[int, OKElem]:
        return _phi_monomial(self.ctx, self.n, j)

    def phi(self, x: LaurentElem) -> LaurentElem:
        n = min(x.n, self.n)
        out: dict[int, OKElem] = {}
        for j, c in x.coeffs.items():
            for e, v in _phi_monomial(self.ctx, n, j).items():
                t = v * c
                out[e] = out[e] + t if e in out else t
        xp = phi_window(x.xprec, self.q, n)
        return LaurentElem(self.ctx, out, n, xp)

    # ---------------------------------------------------------------- gamma
    def endo(self, a: OKElem, xprec: int) -> LaurentElem:
        return self.group.endomorphism(self.lift(a), xprec)

    def _table(self, a: OKElem) -> "_PowerTable":
        a = self.lift(a)
        key = tuple(a.coeffs)
        tab = self._gamma_tables.get(key)
        if tab is None:
            tab = _PowerTable(self, a)
            self._gamma_tables[key] = tab
        return tab

    def reserve_gamma(self, length: int) -> None:
        """Size the power tables of the Gamma generators for gamma(X^j) with j - T >= -length."""
        for a in self.gamma_gens:
            if not self.is_teichmuller(a):
                self._table(a)._ensure(length + 1, exact=True)

    def gamma_monomial_dense(self, a: OKElem, j: int, T: int) -> np.ndarray:
        """Coefficients of gamma_a(X^j) for exponents j .. T-1 (rows)."""
        return self._table(a).monomial(j, T)

    def gamma(self, a: OKElem, x: LaurentElem, xprec=None) -> LaurentElem:
        n = min(x.n, self.n)
        a = self.lift(a)
        if self.is_teichmuller(a):
            out = {j: c * (a.reduce(n) ** j) for j, c in x.coeffs.items()}
            res = LaurentElem(self.ctx, out, n, x.xprec)
            return res if xprec is None else res.truncate(xprec)
        T = x.xprec if xprec is None else min(x.xprec, xprec)
        if T == INF:
            raise WindowExhausted("gamma of an exact element needs an output window")
        if not x.coeffs:
            return LaurentElem.zero(self.ctx, n, T)
        lo = x.val
        acc = np.zeros((max(T - lo, 0), self.ctx.D), dtype=object)
        mods = np.array(self.ctx.moduli(n), dtype=object)
        for j, c in x.coeffs.items():
            if j >= T:
                continue
            col = self.gamma_monomial_dense(a, j, T).astype(object)
            cc = np.array([c.coeffs], dtype=object)
            prod = _dense.mul(self.ctx, cc, col, n)
            acc[j - lo: j - lo + len(prod)] += prod
        acc = acc % mods
        return LaurentElem.from_dense(self.ctx, acc, lo, n, T)

    # ----------------------------------------------------- decomposition / psi
    def phi_decompose(self, x: LaurentElem) -> list[LaurentElem]:
        """(c_0, ..., c_(q-1)) with x = sum phi(c_i) X^i."""
        ctx, q = self.ctx, self.q
        n = min(x.n, self.n)
        S = decompose_window(x.xprec, q, n)
        parts: list[dict[int, OKElem]] = [dict() for _ in range(q)]
        resid = {j: c for j, c in x.coeffs.items()}
        for r in range(n):
            m = n - r
            if not resid:
                break
            layer: list[dict[int, OKElem]] = [dict() for _ in range(q)]
            for j, c in resid.items():
                rep = c.reduce(1)
                if rep.is_zero():
                    continue
                s, i = divmod(j, q)
                layer[i][s] = OKElem(ctx, rep.coeffs, m)
            new: dict[int, OKElem] = dict(resid)
            for i in range(q):
                for s, c in layer[i].items():
                    for e, v in _phi_monomial(ctx, m, s).items():
                        t = v * c
                        k = e + i
                        new[k] = new[k] - t if k in new else -t
            nxt = {}
            for k, v in new.items():
                v = v.reduce(m)
                if v.is_zero():
                    continue
                if m > 1:
                    nxt[k] = v.div_pi(1)
                elif not v.is_zero():
                    raise OKError("decomposition residual is not divisible by pi")
            pik = ctx.pi(n) ** r
            for i in range(q):
                for s, c in layer[i].items():
                    t = OKElem(ctx, c.coeffs, n) * pik
                    parts[i][s] = parts[i][s] + t if s in parts[i] else t
            resid = nxt
        return [LaurentElem(ctx, parts[i], n, S) for i in range(q)]

    def psi(self, x: LaurentElem) -> LaurentElem:
        cs = self.phi_decompose(x)
        n = min(x.n, self.n)
        acc = LaurentElem.zero(self.ctx, n, cs[0].xprec)
        for c, t in zip(cs, self._trace_over_pi):
            if not t.is_zero():
                acc = acc + c.scale(t.reduce(n))
        return acc

    def psi_monomial(self, j: int) -> dict[int, OKElem]:
        return _psi_monomial(self, j)


class _PowerTable:
    """Dense powers of v = [a](X)/X, so that gamma_a(X^j) = X^j v^j."""

    def __init__(self, octx: OperatorContext, a: OKElem):
        self.octx = octx
        self.a = a
        self.length = 0
        self.pows: dict[int, np.ndarray] = {}
        self.steps: dict[tuple[int, int], np.ndarray] = {}

    def _ensure(self, length: int, exact: bool = False) -> None:
        if length <= self.length:
            return
        if not exact:
            length = max(length, 2 * self.length, 16)
        o = self.octx
        ctx, n = o.ctx, o.n
        e = o.group.endomorphism(self.a, length + 1)
        v = e.shift(-1).to_dense(0, length)
        self.v = v
        self.w = _dense.inv_series(ctx, v, n, length)
        self.length = length
        self.pows = {0: _unit(ctx, length)}
        self.steps = {}

    def _step(self, base: np.ndarray, d: int, sign: int, length: int) -> np.ndarray:
        """base^d to the given length, via cached binary powers."""
        ctx, n = self.octx.ctx, self.octx.n
        key = (sign, d)
        hit = self.steps.get(key)
        if hit is not None and len(hit) >= length:
            return hit[:length]
        length = self.length
        out = None
        sq = base[:length]
        e = d
        while e:
            if e & 1:
                out = sq if out is None else _dense.mul(ctx, out, sq, n, length)
            e >>= 1
            if e:
                sq = _dense.mul(ctx, sq, sq, n, length)
        self.steps[key] = out
        return out[:length]

    def power(self, j: int, length: int) -> np.ndarray:
        """v^j truncated to `length` coefficients."""
        self._ensure(length)
        length = min(length, self.length)
        hit = self.pows.get(j)
        if hit is not None and len(hit) >= length:
            return hit[:length]
        ctx, n = self.octx.ctx, self.octx.n
        # start from the nearest cached power on either side
        near = next((i for i in (j - 1, j + 1) if len(self.pows.get(i, ())) >= length), None)
        if near is None:
            near = min((i for i, arr in self.pows.items() if len(arr) >= length), key=lambda i: (abs(j - i), i))
        d = j - near
        base, sign = (self.v, 1) if d > 0 else (self.w, -1)
        step = self._step(base, abs(d), sign, length)[:length]
        cur = _dense.mul(ctx, self.pows[near][:length], step, n, length)
        self.pows[j] = cur
        return cur

    def monomial(self, j: int, T: int) -> np.ndarray:
        length = T - j
        if length <= 0:
            return np.zeros((0, self.octx.ctx.D), dtype=np.int64)
        out = self.power(j, length)
        if len(out) < length:
            pad = np.zeros((length - len(out), out.shape[1]), dtype=out.dtype)
            out = np.vstack([out, pad])
        return out


def _unit(ctx: BaseField, length: int) -> np.ndarray:
    A = np.zeros((length, ctx.D), dtype=np.int64)
    A[0, 0] = 1
    return A


@lru_cache(maxsize=None)
def _pi_pows(ctx: BaseField, n: int) -> tuple[OKElem, ...]:
    out = [ctx.one(n)]
    for _ in range(n):
        out.append(out[-1] * ctx.pi(n))
    return tuple(out)


@lru_cache(maxsize=200000)
def _phi_monomial(ctx: BaseField, n: int, j: int) -> dict[int, OKElem]:
    """phi(X^j) exactly modulo pi^n: a finite sum for every integer j."""
    q = ctx.q
    pp = _pi_pows(ctx, n)
    out: dict[int, OKElem] = {}
    if j >= 0:
        for m in range(max(0, j - n + 1), j + 1):
            c = comb(j, m)
            if c % ctx.p ** n == 0:
                continue
            v = pp[j - m] * c
            if not v.is_zero():
                out[j + m * (q - 1)] = v
    else:
        for k in range(n):
            c = _gen_binom(j, k)
            v = pp[k] * c
            if not v.is_zero():
                out[q * j + k * (1 - q)] = v
    return out


def _gen_binom(j: int, k: int) -> int:
    num = 1
    for i in range(k):
        num *= j - i
    den = 1
    for i in range(2, k + 1):
        den *= i
    return num // den


@lru_cache(maxsize=200000)
def _psi_cache(octx: OperatorContext, j: int) -> tuple:
    x = LaurentElem.monomial(octx.ctx, j, octx.n)
    y = octx.psi(x)
    return tuple(sorted(y.coeffs.items()))


def _psi_monomial(octx: OperatorContext, j: int) -> dict[int, OKElem]:
    return dict(_psi_cache(octx, j))


def trace_table(ctx: BaseField, prec: int) -> list[OKElem]:
    """tr(X^i), 0 <= i < q, for X over phi(O_E), by Newton's identities.

    X is a root of T^q + pi T - phi(X); for i < q the power sums only see the
    elementary symmetric functions e_1 .. e_(q-1), which are constants.
    """
    q = ctx.q
    a = [ctx.zero(prec) for _ in range(q + 1)]  # monic coefficients, a[k] of T^k
    a[q] = ctx.one(prec)
    a[1] = ctx.pi(prec)
    e = [ctx.one(prec)] + [(a[q - j] if j % 2 == 0 else -a[q - j]) for j in range(1, q)]
    p = [ctx.elem(q, prec)]
    for k in range(1, q):
        s = e[k] * k if k % 2 == 1 else -(e[k] * k)
        for j in range(1, k):
            term = e[j] * p[k - j]
            s = s + term if j % 2 == 1 else s - term
        p.append(s)
    return p


def phi(octx: OperatorContext, x: LaurentElem) -> LaurentElem:
    return octx.phi(x)


def gamma(octx: OperatorContext, a: OKElem, x: LaurentElem, xprec=None) -> LaurentElem:
    return octx.gamma(a, x, xprec)


def phi_decompose(octx: OperatorContext, x: LaurentElem) -> list[LaurentElem]:
    return octx.phi_decompose(x)


def psi(octx: OperatorContext, x: LaurentElem) -> LaurentElem:
    return octx.psi(x)
