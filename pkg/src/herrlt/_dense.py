"""Dense numpy kernels for truncated series over O_K / pi^m.

A dense series is an int64 array of shape (L, D): row k holds the coefficient
vector of X^(lo + k) in the basis 1, t, ..., t^(D-1).  These kernels are used
internally for long products; the public series type stays sparse.
"""

from __future__ import annotations

import numpy as np

from .okring import BaseField

_LIMIT = 2 ** 62


def moduli(ctx: BaseField, m: int) -> np.ndarray:
    return np.array(ctx.moduli(m), dtype=object if ctx.p ** ctx.abs_prec(m) >= 2 ** 62 else np.int64)


def _use_object(ctx: BaseField, m: int, length: int) -> bool:
    big = ctx.p ** ctx.abs_prec(m)
    gmax = max(abs(c) for c in ctx.g) + 1
    return big * big * max(length, 1) * gmax * ctx.D >= _LIMIT


def reduce(ctx: BaseField, A: np.ndarray, m: int) -> np.ndarray:
    return A % moduli(ctx, m)


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        out = np.zeros(len(a) + len(b) - 1, dtype=object)
        for i, x in enumerate(a):
            if x:
                out[i:i + len(b)] += x * b
        return out
    return np.convolve(a, b)


def mul(ctx: BaseField, A: np.ndarray, B: np.ndarray, m: int, length: int | None = None) -> np.ndarray:
    """Product of dense series A and B, optionally truncated to `length` rows."""
    D = ctx.D
    La, Lb = len(A), len(B)
    if La == 0 or Lb == 0:
        return np.zeros((0, D), dtype=np.int64)
    if length is not None:
        A = A[:length]
        B = B[:length]
        La, Lb = len(A), len(B)
    out_len = La + Lb - 1
    obj = _use_object(ctx, m, min(La, Lb))
    dtype = object if obj else np.int64
    A = A.astype(dtype)
    B = B.astype(dtype)
    big = ctx.p ** ctx.abs_prec(m)
    if not obj and min(La, Lb) >= 64 and big * big * min(La, Lb) * D < 2 ** 50:
        poly = _fft_poly(A % big, B % big, out_len, D)
    else:
        poly = _direct_poly(A, B, out_len, D, dtype)
    out = poly[:, :D].copy()
    red = ctx._tpow_red
    for k in range(D, 2 * D - 1):
        col = poly[:, k]
        if col.any():
            for i in range(D):
                if red[k][i]:
                    out[:, i] += col * red[k][i]
    out = out % np.array(ctx.moduli(m), dtype=dtype)
    if length is not None:
        out = out[:length]
    if obj and big < 2 ** 62:
        out = out.astype(np.int64)
    return out


def _direct_poly(A: np.ndarray, B: np.ndarray, out_len: int, D: int, dtype) -> np.ndarray:
    poly = np.zeros((out_len, 2 * D - 1), dtype=dtype)
    for i in range(D):
        ai = A[:, i]
        if not ai.any():
            continue
        for j in range(D):
            bj = B[:, j]
            if bj.any():
                poly[:, i + j] += _conv(ai, bj)
    return poly


def _fft_poly(A: np.ndarray, B: np.ndarray, out_len: int, D: int) -> np.ndarray:
    # exact: every convolution sum stays far below 2^53
    nfft = 1 << (out_len - 1).bit_length()
    FA = np.fft.rfft(A.astype(np.float64), nfft, axis=0)
    FB = np.fft.rfft(B.astype(np.float64), nfft, axis=0)
    poly = np.zeros((out_len, 2 * D - 1), dtype=np.int64)
    for i in range(D):
        for j in range(D):
            c = np.fft.irfft(FA[:, i] * FB[:, j], nfft)[:out_len]
            poly[:, i + j] += np.rint(c).astype(np.int64)
    return poly


def scalar_mul(ctx: BaseField, c: tuple[int, ...], A: np.ndarray, m: int) -> np.ndarray:
    cc = np.zeros((1, ctx.D), dtype=np.int64)
    cc[0, :] = c
    return mul(ctx, cc, A, m)


def inv_series(ctx: BaseField, A: np.ndarray, m: int, length: int) -> np.ndarray:
    """Inverse of a power series whose constant coefficient is a unit, mod X^length."""
    from .okring import OKElem

    D = ctx.D
    a0 = OKElem(ctx, tuple(int(x) for x in A[0]), m)
    w = np.zeros((1, D), dtype=np.int64)
    w[0] = a0.inv().coeffs
    cur = 1
    two = np.zeros((1, D), dtype=np.int64)
    two[0, 0] = 2
    while cur < length:
        cur = min(2 * cur, length)
        aw = mul(ctx, A[:cur], w, m, cur)
        corr = (-aw) % np.array(ctx.moduli(m), dtype=np.int64)
        corr[0] = (corr[0] + two[0]) % np.array(ctx.moduli(m), dtype=np.int64)
        w = mul(ctx, w, corr, m, cur)
    return w[:length]


def power(ctx: BaseField, A: np.ndarray, k: int, m: int, length: int) -> np.ndarray:
    result = np.zeros((1, ctx.D), dtype=np.int64)
    result[0, 0] = 1
    base = A[:length]
    while k:
        if k & 1:
            result = mul(ctx, result, base, m, length)
        k >>= 1
        if k:
            base = mul(ctx, base, base, m, length)
    return result
