"""Truncated Laurent series over O_K / pi^n (elements of O_E / pi^n).

A LaurentElem stores a sparse map exponent -> OKElem together with

* ``val``: a lower bound for the exponents present (the minimal stored
  exponent, or +inf for an exactly known zero),
* ``xprec``: the X-adic precision; coefficients of exponents >= xprec are
  unknown (``INF`` when the series is known exactly),
* ``n``: the pi-adic precision of every coefficient.

Every operation returns a pessimistic window on which the result is correct.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from . import _dense
from .okring import INF, BaseField, ContextMismatch, OKElem, OKError
from .okring import NotAUnit as _OKNotAUnit


class SeriesError(OKError):
    pass


class NotAUnit(SeriesError, _OKNotAUnit):
    pass


class ResidueOutsideWindow(SeriesError):
    pass


class NonComposable(SeriesError):
    pass


_DENSE_THRESHOLD = 24


def _fmt(x) -> str:
    return "inf" if x == INF else str(int(x))


def _parse_num(s: str):
    s = s.strip()
    return INF if s == "inf" else int(s)


class LaurentElem:
    __slots__ = ("ctx", "coeffs", "val", "xprec", "n")

    def __init__(self, ctx: BaseField, coeffs: Mapping[int, OKElem | int | Sequence[int]],
                 n: int, xprec=INF):
        self.ctx = ctx
        self.n = int(n)
        self.xprec = xprec
        clean: dict[int, OKElem] = {}
        for k, c in coeffs.items():
            if k >= xprec:
                continue
            if isinstance(c, OKElem):
                if c.ctx != ctx:
                    raise ContextMismatch("coefficient from another base field")
                c = c.reduce(self.n) if c.prec >= self.n else c
                if c.prec < self.n:
                    raise SeriesError("coefficient precision below series precision")
            elif isinstance(c, int):
                c = ctx.elem(c, self.n)
            else:
                c = ctx.elem(list(c), self.n)
            if not c.is_zero():
                clean[int(k)] = c
        self.coeffs = clean
        self.val = min(clean) if clean else xprec

    # constructors -----------------------------------------------------------
    @classmethod
    def zero(cls, ctx: BaseField, n: int, xprec=INF) -> "LaurentElem":
        return cls(ctx, {}, n, xprec)

    @classmethod
    def constant(cls, c: OKElem | int, ctx: BaseField, n: int) -> "LaurentElem":
        return cls(ctx, {0: c}, n)

    @classmethod
    def monomial(cls, ctx: BaseField, k: int, n: int, c: OKElem | int = 1) -> "LaurentElem":
        return cls(ctx, {k: c}, n)

    @classmethod
    def X(cls, ctx: BaseField, n: int) -> "LaurentElem":
        return cls.monomial(ctx, 1, n)

    @classmethod
    def from_ints(cls, ctx: BaseField, data: Mapping[int, int], n: int, xprec=INF) -> "LaurentElem":
        return cls(ctx, dict(data), n, xprec)

    # dense conversion -------------------------------------------------------
    def to_dense(self, lo: int, hi: int) -> np.ndarray:
        D = self.ctx.D
        A = np.zeros((max(hi - lo, 0), D), dtype=np.int64)
        for k, c in self.coeffs.items():
            if lo <= k < hi:
                A[k - lo] = c.coeffs
        return A

    @classmethod
    def from_dense(cls, ctx: BaseField, A: np.ndarray, lo: int, n: int, xprec=INF) -> "LaurentElem":
        coeffs = {}
        nz = np.nonzero(A.any(axis=1))[0]
        for i in nz:
            coeffs[lo + int(i)] = OKElem(ctx, tuple(int(x) for x in A[i]), n)
        return cls(ctx, coeffs, n, xprec)

    # protocol ---------------------------------------------------------------
    def __repr__(self) -> str:
        terms = " + ".join(f"{c.coeffs}*X^{k}" for k, c in sorted(self.coeffs.items()))
        return f"LaurentElem({terms or '0'}; xprec={_fmt(self.xprec)}, n={self.n})"

    def coeff(self, k: int) -> OKElem:
        if k >= self.xprec:
            raise SeriesError(f"coefficient of X^{k} is beyond the known window")
        return self.coeffs.get(k, self.ctx.zero(self.n))

    def _check(self, other: "LaurentElem") -> None:
        if self.ctx != other.ctx:
            raise ContextMismatch("series from different base fields")

    def _lift(self, other) -> "LaurentElem":
        if isinstance(other, LaurentElem):
            self._check(other)
            return other
        if isinstance(other, (int, OKElem)):
            return LaurentElem.constant(other, self.ctx, self.n)
        return NotImplemented

    def truncate(self, xprec=INF, n: int | None = None) -> "LaurentElem":
        n = self.n if n is None else min(n, self.n)
        xp = min(self.xprec, xprec)
        return LaurentElem(self.ctx, {k: c for k, c in self.coeffs.items() if k < xp}, n, xp)

    def is_exact(self) -> bool:
        return self.xprec == INF

    def is_zero(self) -> bool:
        return not self.coeffs

    def unit_exponent(self):
        """Smallest exponent with a unit coefficient (None if the reduction mod pi vanishes)."""
        best = None
        for k, c in self.coeffs.items():
            if c.is_unit() and (best is None or k < best):
                best = k
        return best

    def is_unit(self) -> bool:
        k = self.unit_exponent()
        return k is not None

    def max_exp(self):
        return max(self.coeffs) if self.coeffs else None

    # arithmetic -------------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        n = min(self.n, other.n)
        xp = min(self.xprec, other.xprec)
        out = {k: c for k, c in self.coeffs.items() if k < xp}
        for k, c in other.coeffs.items():
            if k < xp:
                out[k] = out[k] + c if k in out else c
        return LaurentElem(self.ctx, out, n, xp)

    __radd__ = __add__

    def __neg__(self):
        return LaurentElem(self.ctx, {k: -c for k, c in self.coeffs.items()}, self.n, self.xprec)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: OKElem | int) -> "LaurentElem":
        if isinstance(c, int):
            c = self.ctx.elem(c, self.n)
        n = min(self.n, c.prec)
        return LaurentElem(self.ctx, {k: v * c for k, v in self.coeffs.items()}, n, self.xprec)

    def shift(self, k: int) -> "LaurentElem":
        """Multiply by X^k."""
        return LaurentElem(self.ctx, {e + k: c for e, c in self.coeffs.items()}, self.n, self.xprec + k)

    def __mul__(self, other):
        if isinstance(other, (int, OKElem)):
            return self.scale(other)
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return _mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "LaurentElem":
        if k < 0:
            return l_inv(self) ** (-k)
        result = LaurentElem.constant(1, self.ctx, self.n)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def eq_window(self, other: "LaurentElem", xprec=None, n: int | None = None) -> bool:
        """Equality on the common known window (optionally narrowed)."""
        self._check(other)
        xp = min(self.xprec, other.xprec)
        if xprec is not None:
            xp = min(xp, xprec)
        nn = min(self.n, other.n)
        if n is not None:
            nn = min(nn, n)
        keys = set(self.coeffs) | set(other.coeffs)
        for k in keys:
            if k < xp and not self.coeff(k).eq_mod(other.coeff(k), nn):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, LaurentElem):
            return NotImplemented
        return self.eq_window(other)

    __hash__ = None

    # text form --------------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"val={_fmt(self.val)};xprec={_fmt(self.xprec)};pi_prec={self.n}"]
        for k in sorted(self.coeffs):
            lines.append(f"{k}: {self.coeffs[k]}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, ctx: BaseField, text: str) -> "LaurentElem":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        header = dict(item.split("=", 1) for item in lines[0].strip().split(";"))
        n = int(header["pi_prec"])
        xprec = _parse_num(header["xprec"])
        coeffs = {}
        for ln in lines[1:]:
            k, body = ln.split(":", 1)
            coeffs[int(k)] = OKElem.parse(ctx, body).reduce(n)
        return cls(ctx, coeffs, n, xprec)


def _mul(a: LaurentElem, b: LaurentElem) -> LaurentElem:
    ctx = a.ctx
    n = min(a.n, b.n)
    if a.is_zero() and a.is_exact() or b.is_zero() and b.is_exact():
        return LaurentElem.zero(ctx, n)
    va = a.val if a.coeffs else a.xprec
    vb = b.val if b.coeffs else b.xprec
    xprec = min(a.xprec + vb, b.xprec + va)
    if not a.coeffs or not b.coeffs:
        return LaurentElem.zero(ctx, n, xprec)
    if len(a.coeffs) >= _DENSE_THRESHOLD and len(b.coeffs) >= _DENSE_THRESHOLD:
        lo_a, hi_a = a.val, a.max_exp() + 1
        lo_b, hi_b = b.val, b.max_exp() + 1
        length = None
        if xprec != INF:
            length = max(int(xprec - lo_a - lo_b), 0)
        A = a.to_dense(lo_a, hi_a)
        B = b.to_dense(lo_b, hi_b)
        if length is not None and length == 0:
            return LaurentElem.zero(ctx, n, xprec)
        C = _dense.mul(ctx, A, B, n, length)
        return LaurentElem.from_dense(ctx, C, lo_a + lo_b, n, xprec)
    out: dict[int, OKElem] = {}
    for i, ci in a.coeffs.items():
        for j, cj in b.coeffs.items():
            k = i + j
            if k >= xprec:
                continue
            prod = ci * cj
            out[k] = out[k] + prod if k in out else prod
    return LaurentElem(ctx, out, n, xprec)


def _chop(a: LaurentElem, k) -> LaurentElem:
    """Drop the terms of exponent >= k of an exact series (the result stays exact)."""
    return LaurentElem(a.ctx, {e: c for e, c in a.coeffs.items() if e < k}, a.n)


def l_add(a: LaurentElem, b: LaurentElem) -> LaurentElem:
    return a + b


def l_mul(a: LaurentElem, b: LaurentElem) -> LaurentElem:
    return a * b


def l_inv(a: LaurentElem, xprec=None) -> LaurentElem:
    """Inverse of a unit of O_E / pi^n.

    a = c X^k0 (1 + u) with k0 the smallest exponent carrying a unit
    coefficient; the unit-coefficient part of u has positive exponents and the
    remaining part of u is divisible by pi, so the geometric series converges
    (pi, X)-adically.  It is summed by Newton iteration w <- w (2 - (1+u) w).
    ``xprec`` caps the output window (required when a is exact and its
    inverse is an infinite series).
    """
    k0 = a.unit_exponent()
    if k0 is None:
        raise NotAUnit("series is not a unit of O_E / pi^n (zero mod pi)")
    ctx, n = a.ctx, a.n
    c = a.coeffs[k0]
    cinv = c.inv()
    u = a.shift(-k0).scale(cinv) - 1
    # negative exponents of u carry a factor pi, so any product that survives
    # mod pi^n reaches at most (n - 1) * B below its unit-part exponent
    B = max(0, -u.val) if u.coeffs else 0
    drift = (n - 1) * B
    target = u.xprec - drift
    if xprec is not None:
        target = min(target, xprec + k0)
    ue = LaurentElem(ctx, u.coeffs, n)
    one = LaurentElem.constant(1, ctx, n)
    if not any(v.is_unit() for v in ue.coeffs.values()):
        # u is pi-divisible: the geometric series stops after n terms
        w = one
        term = one
        for _ in range(n - 1):
            term = -(term * ue)
            if term.is_zero():
                break
            w = w + term
    else:
        if target == INF:
            raise SeriesError("inverse of an exact series with infinite expansion needs a target window")
        work = target + drift
        w = one
        up = _chop(one + ue, work)
        for _ in range(200):
            err = _chop(one - up * w, work)
            if err.is_zero():
                break
            w = _chop(w + w * err, work)
        else:
            raise SeriesError("series inversion did not converge")
    w = w.truncate(target)
    return w.shift(-k0).scale(cinv)


def l_subst(f: LaurentElem, g: LaurentElem, xprec=None) -> LaurentElem:
    """f(g) for g with all exponents >= 1; negative powers of g through l_inv.

    ``xprec`` caps the output window; it is needed when f has negative
    exponents and g is exact with an infinite inverse.
    """
    if g.coeffs and g.val < 1:
        raise NonComposable("substituted series must have positive valuation")
    if not g.coeffs and g.xprec <= 1:
        raise NonComposable("substituted series has no known terms")
    if f.xprec != INF and f.xprec <= 0:
        raise NonComposable("outer series must be known beyond the constant term")
    ctx = f.ctx
    n = min(f.n, g.n)
    if not f.coeffs:
        return LaurentElem.zero(ctx, n, f.xprec * (g.val if g.coeffs else g.xprec))
    top = f.max_exp()
    bottom = f.val
    tail = INF
    if f.xprec != INF:
        tail = f.xprec * (g.val if g.coeffs else g.xprec)
    if xprec is not None:
        tail = min(tail, xprec)
    acc = LaurentElem.zero(ctx, n)
    if top >= 0:
        pw = LaurentElem.constant(1, ctx, n)
        for k in range(0, top + 1):
            if k in f.coeffs:
                acc = acc + pw.truncate(tail) * f.coeffs[k]
            if k < top:
                pw = (pw * g).truncate(tail)
    if bottom < 0:
        ginv = l_inv(g, None if tail == INF else tail - bottom + 1)
        pw = ginv
        for k in range(-1, bottom - 1, -1):
            if k in f.coeffs:
                acc = acc + pw.truncate(tail) * f.coeffs[k]
            if k > bottom:
                pw = (pw * ginv).truncate(tail)
    return acc.truncate(tail)


def l_derivative(f: LaurentElem) -> LaurentElem:
    out = {}
    for k, c in f.coeffs.items():
        if k != 0:
            out[k - 1] = c * k
    return LaurentElem(f.ctx, out, f.n, f.xprec - 1)


def l_residue(f: LaurentElem) -> OKElem:
    """Coefficient of X^(-1) (the residue of the form f dX)."""
    if f.xprec <= -1:
        raise ResidueOutsideWindow("degree -1 is outside the known window")
    return f.coeff(-1)


# --------------------------------------------------------------------------
# multivariate truncated power series (used for F(X, Y) and its checks)


class MultiSeries:
    """Power series in several variables truncated at total degree < deg_prec."""

    __slots__ = ("ctx", "nvars", "coeffs", "deg_prec", "n")

    def __init__(self, ctx: BaseField, nvars: int, coeffs: Mapping[tuple, OKElem | int],
                 deg_prec: int, n: int):
        self.ctx = ctx
        self.nvars = nvars
        self.deg_prec = deg_prec
        self.n = n
        clean = {}
        for mono, c in coeffs.items():
            if sum(mono) >= deg_prec:
                continue
            if isinstance(c, int):
                c = ctx.elem(c, n)
            else:
                c = c.reduce(n)
            if not c.is_zero():
                clean[tuple(mono)] = c
        self.coeffs = clean

    @classmethod
    def variable(cls, ctx, nvars, i, deg_prec, n) -> "MultiSeries":
        mono = [0] * nvars
        mono[i] = 1
        return cls(ctx, nvars, {tuple(mono): 1}, deg_prec, n)

    @classmethod
    def constant(cls, ctx, nvars, c, deg_prec, n) -> "MultiSeries":
        return cls(ctx, nvars, {(0,) * nvars: c}, deg_prec, n)

    def coeff(self, *mono: int) -> OKElem:
        return self.coeffs.get(tuple(mono), self.ctx.zero(self.n))

    def __add__(self, other: "MultiSeries") -> "MultiSeries":
        dp = min(self.deg_prec, other.deg_prec)
        n = min(self.n, other.n)
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out[m] + c if m in out else c
        return MultiSeries(self.ctx, self.nvars, out, dp, n)

    def __neg__(self) -> "MultiSeries":
        return MultiSeries(self.ctx, self.nvars, {m: -c for m, c in self.coeffs.items()},
                           self.deg_prec, self.n)

    def __sub__(self, other: "MultiSeries") -> "MultiSeries":
        return self + (-other)

    def scale(self, c: OKElem | int) -> "MultiSeries":
        if isinstance(c, int):
            c = self.ctx.elem(c, self.n)
        return MultiSeries(self.ctx, self.nvars, {m: v * c for m, v in self.coeffs.items()},
                           self.deg_prec, min(self.n, c.prec))

    def __mul__(self, other):
        if isinstance(other, (int, OKElem)):
            return self.scale(other)
        dp = min(self.deg_prec, other.deg_prec)
        n = min(self.n, other.n)
        out: dict[tuple, OKElem] = {}
        for m1, c1 in self.coeffs.items():
            d1 = sum(m1)
            for m2, c2 in other.coeffs.items():
                if d1 + sum(m2) >= dp:
                    continue
                m = tuple(a + b for a, b in zip(m1, m2))
                prod = c1 * c2
                out[m] = out[m] + prod if m in out else prod
        return MultiSeries(self.ctx, self.nvars, out, dp, n)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "MultiSeries":
        result = MultiSeries.constant(self.ctx, self.nvars, 1, self.deg_prec, self.n)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def homogeneous(self, k: int) -> "MultiSeries":
        return MultiSeries(self.ctx, self.nvars,
                           {m: c for m, c in self.coeffs.items() if sum(m) == k},
                           self.deg_prec, self.n)

    def is_zero(self) -> bool:
        return not self.coeffs

    def compose(self, subs: Sequence["MultiSeries"]) -> "MultiSeries":
        """Substitute series without constant term for the variables."""
        if len(subs) != self.nvars:
            raise SeriesError("wrong number of substitutions")
        target = subs[0]
        nv = target.nvars
        dp = min([self.deg_prec] + [s.deg_prec for s in subs])
        n = min([self.n] + [s.n for s in subs])
        for s in subs:
            if s.coeffs.get((0,) * nv) is not None:
                raise NonComposable("substituted series must have zero constant term")
        powers: list[dict[int, MultiSeries]] = [{0: MultiSeries.constant(self.ctx, nv, 1, dp, n)}
                                                for _ in subs]

        def pw(i: int, k: int) -> MultiSeries:
            table = powers[i]
            if k not in table:
                table[k] = pw(i, k - 1) * subs[i]
            return table[k]

        acc = MultiSeries(self.ctx, nv, {}, dp, n)
        for mono, c in self.coeffs.items():
            term = MultiSeries.constant(self.ctx, nv, c, dp, n)
            for i, k in enumerate(mono):
                if k:
                    term = term * pw(i, k)
            acc = acc + term
        return acc

    def eval_univariate(self, args: Sequence[LaurentElem], xprec: int | None = None) -> LaurentElem:
        """Evaluate at univariate power series with zero constant term."""
        n = min([self.n] + [a.n for a in args])
        vmin = min((a.val if a.coeffs else a.xprec) for a in args)
        bound = self.deg_prec * max(vmin, 1)
        if xprec is not None:
            bound = min(bound, xprec)
        for a in args:
            bound = min(bound, a.xprec)
        cache: list[dict[int, LaurentElem]] = [{0: LaurentElem.constant(1, self.ctx, n)} for _ in args]

        def pw(i: int, k: int) -> LaurentElem:
            table = cache[i]
            if k not in table:
                table[k] = (pw(i, k - 1) * args[i]).truncate(bound)
            return table[k]

        acc = LaurentElem.zero(self.ctx, n)
        for mono, c in self.coeffs.items():
            term = LaurentElem.constant(c, self.ctx, n)
            for i, k in enumerate(mono):
                if k:
                    term = term * pw(i, k)
            acc = acc + term.truncate(bound)
        return acc.truncate(bound)

    def to_text(self) -> str:
        lines = [f"nvars={self.nvars};total_deg_prec={self.deg_prec};pi_prec={self.n}"]
        for m in sorted(self.coeffs, key=lambda m: (sum(m), tuple(-x for x in m))):
            lines.append(f"{','.join(str(x) for x in m)}: {self.coeffs[m]}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, ctx: BaseField, text: str) -> "MultiSeries":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        header = dict(item.split("=", 1) for item in lines[0].split(";"))
        nv, dp, n = int(header["nvars"]), int(header["total_deg_prec"]), int(header["pi_prec"])
        coeffs = {}
        for ln in lines[1:]:
            mono, body = ln.split(":", 1)
            coeffs[tuple(int(x) for x in mono.split(","))] = OKElem.parse(ctx, body)
        return cls(ctx, nv, coeffs, dp, n)

    def __eq__(self, other):
        if not isinstance(other, MultiSeries):
            return NotImplemented
        return (self - other).is_zero()

    __hash__ = None


def BivariateSeries(ctx: BaseField, coeffs: Mapping[tuple, OKElem | int], total_deg_prec: int,
                    n: int) -> MultiSeries:
    return MultiSeries(ctx, 2, coeffs, total_deg_prec, n)
