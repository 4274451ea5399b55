"""Exact arithmetic in O_K and its quotients O_K / pi^n.

Two families of base fields are supported:

* ``unramified``: K = Q_p[t]/(g) with g irreducible mod p of degree r.
  The uniformizer is p and q = p^r.
* ``eisenstein``: K = Q_p[t]/(g) with g Eisenstein of degree e. The
  uniformizer is t and q = p.

Elements are stored as coefficient vectors in the basis 1, t, ..., t^(D-1)
where D = deg g.  Every element carries a pi-adic precision m and is kept in
a canonical reduced form modulo pi^m.  For the Eisenstein family the ideal
pi^m O_K is diagonal in this basis (v_pi(c t^i) = e v_p(c) + i), so the
coordinate i is reduced modulo p^ceil((m - i) / e).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

INF = float("inf")


class OKError(ValueError):
    pass


class ContextMismatch(OKError):
    pass


class NotAUnit(OKError):
    pass


class InsufficientValuation(OKError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def vp(x: int, p: int) -> int | float:
    if x == 0:
        return INF
    k = 0
    while x % p == 0:
        x //= p
        k += 1
    return k


def _poly_mod_p_rem(a: list[int], b: list[int], p: int) -> list[int]:
    """Remainder of a by monic-after-normalisation b over F_p (ascending lists)."""
    a = [c % p for c in a]
    while a and a[-1] == 0:
        a.pop()
    b = [c % p for c in b]
    while b and b[-1] == 0:
        b.pop()
    inv = pow(b[-1], -1, p)
    while len(a) >= len(b):
        c = a[-1] * inv % p
        shift = len(a) - len(b)
        for i, bc in enumerate(b):
            a[shift + i] = (a[shift + i] - c * bc) % p
        while a and a[-1] == 0:
            a.pop()
    return a


def _irreducible_mod_p(g: Sequence[int], p: int) -> bool:
    deg = len(g) - 1
    if deg <= 1:
        return True
    # brute force over monic divisors of degree <= deg/2; residue fields are small
    for d in range(1, deg // 2 + 1):
        for idx in range(p ** d):
            cand = []
            x = idx
            for _ in range(d):
                cand.append(x % p)
                x //= p
            cand.append(1)
            if not _poly_mod_p_rem(list(g), cand, p):
                return False
    return True


@dataclass(frozen=True)
class BaseField:
    """Arithmetic context: p, family and defining polynomial g (ascending coefficients)."""

    p: int
    family: str
    g: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(int(c) for c in self.g))
        if not is_prime(self.p):
            raise OKError(f"p={self.p} is not prime")
        if self.family not in ("unramified", "eisenstein"):
            raise OKError(f"unknown family {self.family!r}")
        if len(self.g) < 2 or self.g[-1] != 1:
            raise OKError("g must be monic of degree >= 1")
        if self.family == "unramified":
            if not _irreducible_mod_p(self.g, self.p):
                raise OKError("g is not irreducible mod p")
        else:
            p = self.p
            if any(c % p for c in self.g[:-1]) or self.g[0] % (p * p) == 0:
                raise OKError("g is not Eisenstein at p")
            if self.D >= p - 1:
                raise OKError("Eisenstein family requires e < p - 1")

    # structural invariants -------------------------------------------------
    @property
    def D(self) -> int:
        return len(self.g) - 1

    @property
    def e(self) -> int:
        return self.D if self.family == "eisenstein" else 1

    @property
    def r(self) -> int:
        return self.D if self.family == "unramified" else 1

    @property
    def q(self) -> int:
        return self.p ** self.r

    @property
    def d(self) -> int:
        return self.r * self.e

    def __str__(self) -> str:
        return f"p={self.p};family={self.family};g=[{','.join(str(c) for c in self.g)}]"

    @classmethod
    def parse(cls, text: str) -> "BaseField":
        parts = dict(item.split("=", 1) for item in text.strip().split(";") if item)
        g = [int(c) for c in parts["g"].strip("[]").split(",") if c.strip()]
        return cls(int(parts["p"]), parts["family"], tuple(g))

    # reduction data --------------------------------------------------------
    @cached_property
    def _moduli_cache(self) -> dict[int, tuple[int, ...]]:
        return {}

    def moduli(self, m: int) -> tuple[int, ...]:
        """Per-coordinate p-power moduli describing pi^m O_K."""
        hit = self._moduli_cache.get(m)
        if hit is not None:
            return hit
        if self.family == "unramified":
            out = (self.p ** max(m, 0),) * self.D
        else:
            out = tuple(self.p ** max(-(-(m - i) // self.e), 0) for i in range(self.D))
        self._moduli_cache[m] = out
        return out

    def abs_prec(self, m: int) -> int:
        return -(-m // self.e)

    @cached_property
    def _tpow_red(self) -> list[tuple[int, ...]]:
        # t^k reduced mod g for k in [0, 2D-1), as integer vectors (exact over Z)
        D = self.D
        out = []
        cur = [0] * D
        cur[0] = 1
        for _ in range(2 * D - 1):
            out.append(tuple(cur))
            top = cur[-1]
            cur = [0] + cur[:-1]
            if top:
                for i in range(D):
                    cur[i] -= top * self.g[i]
        return out

    def mul_coeffs(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        D = self.D
        if D == 1:
            return [a[0] * b[0]]
        prod = [0] * (2 * D - 1)
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    prod[i + j] += ai * bj
        out = list(prod[:D])
        red = self._tpow_red
        for k in range(D, 2 * D - 1):
            c = prod[k]
            if c:
                vec = red[k]
                for i in range(D):
                    out[i] += c * vec[i]
        return out

    # convenient constructors ----------------------------------------------
    def elem(self, coeffs: Iterable[int] | int, prec: int) -> "OKElem":
        if isinstance(coeffs, int):
            coeffs = [coeffs] + [0] * (self.D - 1)
        return OKElem(self, tuple(coeffs), prec)

    def zero(self, prec: int) -> "OKElem":
        return self.elem(0, prec)

    def one(self, prec: int) -> "OKElem":
        return self.elem(1, prec)

    def t(self, prec: int) -> "OKElem":
        c = [0] * self.D
        if self.D == 1:
            # degree-one g: t is the integer root of g
            return self.elem(-self.g[0], prec)
        c[1] = 1
        return self.elem(c, prec)

    def pi(self, prec: int) -> "OKElem":
        if self.family == "unramified":
            return self.elem(self.p, prec)
        return self.t(prec)

    def q_over_pi(self, prec: int) -> "OKElem":
        """q / pi as an element of O_K (v_pi(q) = r e >= 1)."""
        return self.elem(self.q, prec + 1).div_pi(1)

    def residue_reps(self) -> list[tuple[int, ...]]:
        """Coefficient vectors of all residue field elements (Teichmuller-free lifts)."""
        if self.family == "eisenstein":
            return [(a,) + (0,) * (self.D - 1) for a in range(self.p)]
        out = []
        for idx in range(self.q):
            v = []
            x = idx
            for _ in range(self.D):
                v.append(x % self.p)
                x //= self.p
            out.append(tuple(v))
        return out

    def residue_generator(self) -> tuple[int, ...]:
        """A generator of the cyclic group F_q^x (smallest in enumeration order)."""
        q = self.q
        factors = [f for f in range(2, q) if (q - 1) % f == 0 and is_prime(f)]
        for rep in self.residue_reps():
            if not any(rep):
                continue
            x = self.elem(rep, 1)
            if all(not (x ** ((q - 1) // f)).is_one() for f in factors):
                return rep
        raise OKError("no generator of the residue field found")


class OKElem:
    """An element of O_K / pi^prec in canonical reduced coordinates."""

    __slots__ = ("ctx", "coeffs", "prec")

    def __init__(self, ctx: BaseField, coeffs: Sequence[int], prec: int):
        if len(coeffs) != ctx.D:
            raise OKError("coefficient vector has the wrong length")
        self.ctx = ctx
        self.prec = int(prec)
        mods = ctx.moduli(self.prec)
        self.coeffs = tuple(int(c) % m for c, m in zip(coeffs, mods))

    # basic protocol --------------------------------------------------------
    @property
    def abs_prec(self) -> int:
        return self.ctx.abs_prec(self.prec)

    def __repr__(self) -> str:
        return f"OKElem({self})"

    def __str__(self) -> str:
        body = "[" + ",".join(str(c) for c in self.coeffs) + "]"
        if self.prec % self.ctx.e == 0:
            return f"{body} mod p^{self.prec // self.ctx.e}"
        return f"{body} mod pi^{self.prec}"

    @classmethod
    def parse(cls, ctx: BaseField, text: str) -> "OKElem":
        m = re.fullmatch(r"\s*\[([^\]]*)\]\s*mod\s*(p|pi)\^(\d+)\s*", text)
        if not m:
            raise OKError(f"cannot parse O_K element: {text!r}")
        coeffs = [int(c) for c in m.group(1).split(",") if c.strip()]
        k = int(m.group(3))
        prec = k * ctx.e if m.group(2) == "p" else k
        return cls(ctx, coeffs, prec)

    def _check(self, other: "OKElem") -> None:
        if self.ctx != other.ctx:
            raise ContextMismatch("elements from different base fields")

    def _lift(self, other) -> "OKElem":
        if isinstance(other, OKElem):
            self._check(other)
            return other
        if isinstance(other, int):
            return self.ctx.elem(other, self.prec)
        return NotImplemented

    def with_prec(self, prec: int) -> "OKElem":
        """Truncate (never pads: raising precision keeps the same representative)."""
        return OKElem(self.ctx, self.coeffs, prec)

    def reduce(self, prec: int) -> "OKElem":
        return OKElem(self.ctx, self.coeffs, min(prec, self.prec))

    # arithmetic -------------------------------------------------------------
    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return OKElem(self.ctx, [a + b for a, b in zip(self.coeffs, other.coeffs)],
                      min(self.prec, other.prec))

    __radd__ = __add__

    def __neg__(self):
        return OKElem(self.ctx, [-a for a in self.coeffs], self.prec)

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return OKElem(self.ctx, [a - b for a, b in zip(self.coeffs, other.coeffs)],
                      min(self.prec, other.prec))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return OKElem(self.ctx, self.ctx.mul_coeffs(self.coeffs, other.coeffs),
                      min(self.prec, other.prec))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        result = self.ctx.one(self.prec)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = self.ctx.elem(other, self.prec)
        if not isinstance(other, OKElem) or other.ctx != self.ctx:
            return NotImplemented
        prec = min(self.prec, other.prec)
        return (self - other).reduce(prec).is_zero()

    def __hash__(self):
        return hash((self.ctx, self.coeffs, self.prec))

    def eq_mod(self, other: "OKElem", n: int) -> bool:
        return (self - other).reduce(n).is_zero()

    # valuation and units ----------------------------------------------------
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_one(self) -> bool:
        return (self - 1).is_zero()

    def v_pi(self) -> int | float:
        """pi-adic valuation; infinity when the element vanishes at its precision."""
        if self.is_zero():
            return INF
        ctx = self.ctx
        if ctx.family == "unramified":
            return min(vp(c, ctx.p) for c in self.coeffs)
        return min(ctx.e * vp(c, ctx.p) + i for i, c in enumerate(self.coeffs) if c)

    def is_unit(self) -> bool:
        return self.prec > 0 and self.v_pi() == 0

    def residue(self) -> tuple[int, ...]:
        """Reduction mod pi as a coefficient vector."""
        return self.reduce(1).coeffs

    def inv(self) -> "OKElem":
        """Inverse of a unit, by a residue-field inverse followed by Newton lifting."""
        if self.prec <= 0:
            return self
        if not self.is_unit():
            raise NotAUnit(f"{self} is not a unit")
        q = self.ctx.q
        y = self.reduce(1) ** (q - 2) if q > 2 else self.reduce(1)
        cur = 1
        while cur < self.prec:
            cur = min(2 * cur, self.prec)
            x = self.reduce(cur)
            y = y.with_prec(cur)
            y = y * (2 - x * y)
        return y.with_prec(self.prec)

    def div_pi(self, k: int = 1) -> "OKElem":
        """Return b with pi^k b = self; the pi-precision drops by k."""
        if k == 0:
            return self
        if self.v_pi() < k:
            raise InsufficientValuation(f"{self} is not divisible by pi^{k}")
        ctx = self.ctx
        if ctx.family == "unramified":
            pk = ctx.p ** k
            return OKElem(ctx, [c // pk for c in self.coeffs], self.prec - k)
        x = self
        for _ in range(k):
            x = x._div_t()
        return x

    def _div_t(self) -> "OKElem":
        ctx = self.ctx
        c = self.coeffs
        shifted = list(c[1:]) + [0]
        res = OKElem(ctx, shifted, self.prec - 1)
        if c[0]:
            res = res + ctx_p_over_pi(ctx, self.prec) * (c[0] // ctx.p)
        return res.with_prec(self.prec - 1)

    def mul_pi(self, k: int = 1) -> "OKElem":
        return self * (self.ctx.pi(self.prec) ** k)


_P_OVER_PI_CACHE: dict[tuple[BaseField, int], OKElem] = {}


def ctx_p_over_pi(ctx: BaseField, prec: int) -> OKElem:
    """p / t in an Eisenstein field, g = t^e + p h(t):  p / t = -t^(e-1) / h(t)."""
    key = (ctx, prec)
    if key not in _P_OVER_PI_CACHE:
        e = ctx.e
        work = prec + e
        h = ctx.elem([c // ctx.p for c in ctx.g[:-1]], work)
        te1 = ctx.elem([0] * (e - 1) + [1], work)
        _P_OVER_PI_CACHE[key] = (-(te1 * h.inv())).with_prec(prec)
    return _P_OVER_PI_CACHE[key]


def teichmuller(ctx: BaseField, res: Sequence[int] | OKElem, prec: int) -> OKElem:
    """Teichmuller lift of a nonzero residue: the unique zeta = res mod pi with zeta^(q-1) = 1."""
    x = res if isinstance(res, OKElem) else ctx.elem(list(res), prec)
    x = x.with_prec(prec)
    if x.reduce(1).is_zero():
        raise OKError("Teichmuller lift of zero residue")
    for _ in range(prec + 1):
        x = x ** ctx.q
    return x


def ok_arith(a: OKElem, b: OKElem, kind: str) -> OKElem:
    if a.ctx != b.ctx:
        raise ContextMismatch("elements from different base fields")
    if kind == "add":
        return a + b
    if kind == "mul":
        return a * b
    raise OKError(f"unknown operation {kind!r}")


def v_pi(a: OKElem) -> int | float:
    return a.v_pi()


def ok_inv(a: OKElem) -> OKElem:
    return a.inv()


def div_pi(a: OKElem, k: int) -> OKElem:
    return a.div_pi(k)
