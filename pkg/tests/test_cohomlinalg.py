import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from herrlt.cohomlinalg import (CohomologyError, NoCertificate, Window, complex_cohomology, default_schedule,
                                h0_exact, h0_map_injective, psi_fixed_and_coker, snf, window_restrict, zp_kernel,
                                zp_snf)
from herrlt.complexes import OperatorExpr, build_complex, phi_to_psi_morphism
from herrlt.frobpsi import OperatorContext
from herrlt.phigamma import character_module, chi_lt_module, rank2_constant_module, tensor, trivial_module

from conftest import E5, FIELDS, Q3, Q3_9, Q5


def ok_matrix(ctx, n, rows):
    return [[ctx.elem(x, n) for x in row] for row in rows]


def ok_mul(A, B):
    return [[sum((A[i][k] * B[k][j] for k in range(len(B))), A[0][0].ctx.zero(A[0][0].prec))
             for j in range(len(B[0]))] for i in range(len(A))]


def is_invertible(U):
    ks, _, _ = snf(U)
    return all(k == 0 for k in ks)


def check_snf(A):
    ks, U, V = snf(A)
    D = ok_mul(ok_mul(U, A), V)
    ctx, n = A[0][0].ctx, A[0][0].prec
    for i, row in enumerate(D):
        for j, x in enumerate(row):
            if i == j and i < len(ks) and ks[i] < n:
                assert x == ctx.pi(n) ** ks[i]
            else:
                assert x.is_zero()
    assert ks == sorted(ks)
    assert is_invertible(U) and is_invertible(V)
    return ks


# ------------------------------------------------------------------ SNF


def test_snf_identity():
    ctx = Q3
    A = ok_matrix(ctx, 2, [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert check_snf(A) == [0, 0, 0]


def test_snf_divisibility_order():
    A = ok_matrix(Q3, 2, [[3, 0], [0, 1]])
    assert check_snf(A) == [0, 1]


def test_snf_zero_entries_report_n():
    A = ok_matrix(Q3, 2, [[0, 0], [0, 9]])
    assert snf(A)[0] == [2, 2]


def image_factors(cols, p, n):
    """Invariant factors of the subgroup of (Z/p^n)^r spanned by the columns, by enumeration."""
    P = p ** n
    r = len(cols[0])
    seen = {tuple([0] * r)}
    frontier = list(seen)
    while frontier:
        nxt = []
        for v in frontier:
            for c in cols:
                w = tuple((a + b) % P for a, b in zip(v, c))
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    killed = [sum(1 for v in seen if all((p ** j * a) % P == 0 for a in v)) for j in range(n + 1)]
    # killed[j] = p^(sum_i min(j, e_i)); the number of factors with e_i >= j is the jump
    jumps = [round(math.log(killed[j] / killed[j - 1], p)) for j in range(1, n + 1)]
    out = []
    for j in range(n, 0, -1):
        cnt = jumps[j - 1] - (jumps[j] if j < n else 0)
        out.extend([j] * cnt)
    return out


def test_snf_brute_force_4x4():
    rng = random.Random(0)
    for _ in range(15):
        rows = [[rng.choice([0, 1, 2, 3, 6, 4, 8]) for _ in range(4)] for _ in range(4)]
        A = ok_matrix(Q3, 2, rows)
        ks = check_snf(A)
        cols = [tuple(rows[i][j] for i in range(4)) for j in range(4)]
        assert sorted([2 - k for k in ks if k < 2], reverse=True) == image_factors(cols, 3, 2)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(sorted(FIELDS)), st.integers(1, 3), st.integers(1, 4), st.integers(1, 4),
       st.randoms(use_true_random=False))
def test_snf_random(key, n, r, c, rng):
    ctx = FIELDS[key]
    N = ctx.abs_prec(n)
    vals = [0, 1, ctx.p, ctx.p ** 2]
    rows = [[[rng.randrange(ctx.p ** N) * rng.choice(vals) for _ in range(ctx.D)] for _ in range(c)]
            for _ in range(r)]
    check_snf(ok_matrix(ctx, n, rows))


def test_zp_snf_and_kernel():
    rng = np.random.default_rng(1)
    for p, M in [(3, 2), (5, 1), (2, 3)]:
        P = p ** M
        for _ in range(30):
            r, c = rng.integers(1, 7, 2)
            A = rng.integers(0, P, (r, c)) * p ** rng.integers(0, M, (r, c)) % P
            vals, V, U = zp_snf(A, p, M, want_V=True, want_U=True)
            D = U.dot(A).dot(V) % P
            expected = np.zeros((r, c), dtype=np.int64)
            for i, v in enumerate(vals):
                expected[i, i] = p ** v
            assert (D == expected).all()
            K = zp_kernel(A, p, M)
            assert (A.dot(K) % P == 0).all()


# --------------------------------------------------------- window restrict


def test_window_rejects_bad_bounds():
    with pytest.raises(CohomologyError):
        Window(0, 3)


def test_restrict_identity():
    o = OperatorContext(Q3, 2)
    M = trivial_module(o)
    W = Window(-3, 3)
    rows, W_out, lossy = window_restrict(OperatorExpr.identity(Q3, 2), M, W)
    assert (W_out.B_lo, W_out.B_hi) == (-3, 3)
    assert not lossy
    assert rows == ok_matrix(Q3, 2, np.eye(6, dtype=int).tolist())


@pytest.mark.parametrize("ctx", [Q3, Q5, Q3_9], ids=["q3", "q5", "q9"])
def test_restrict_gamma_minus_one_is_triangular(ctx):
    o = OperatorContext(ctx, 2)
    M = trivial_module(o)
    op = OperatorExpr.atom(ctx, 2, "gamma", 0) - OperatorExpr.identity(ctx, 2)
    rows, W_out, _ = window_restrict(op, M, Window(-3, 3))
    lo = W_out.B_lo
    for r, row in enumerate(rows):
        k = lo + r
        for c, x in enumerate(row):
            j = -3 + c
            if k <= j:
                assert x.v_pi() >= 1


def test_restrict_phi_minus_one_on_X():
    o = OperatorContext(Q3, 2)
    M = trivial_module(o)
    op = OperatorExpr.atom(Q3, 2, "phi") - OperatorExpr.identity(Q3, 2)
    rows, W_out, lossy = window_restrict(op, M, Window(-2, 3))
    col = [row[3] for row in rows]  # X^1 is the fourth basis vector
    lo = W_out.B_lo
    got = {lo + r: x for r, x in enumerate(col) if not x.is_zero()}
    assert got == {1: Q3.elem(3 - 1, 2), 3: Q3.one(2)}
    assert W_out.B_hi >= 3 * 3 + 3
    assert not lossy


# ------------------------------------------------------------ cohomology


def test_default_schedule():
    assert default_schedule(3) == [12, 24, 48]
    assert default_schedule(2) == [8, 16, 32]
    assert default_schedule(9) == [36, 72, 144]


def test_schedule_validation():
    M = trivial_module(OperatorContext(Q3, 1))
    C = build_complex("lt", M)
    with pytest.raises(CohomologyError):
        complex_cohomology(C, [8, 16])
    with pytest.raises(CohomologyError):
        complex_cohomology(C, [8, 8, 16])


@pytest.mark.parametrize("ctx", [Q3, Q5], ids=["q3", "q5"])
@pytest.mark.parametrize("n", [1, 2])
def test_trivial_module(ctx, n):
    C = build_complex("lt", trivial_module(OperatorContext(ctx, n)))
    res = complex_cohomology(C)
    assert res.factors == {0: [n], 1: [n, n], 2: []}
    assert all(res.stabilized.values())
    assert res.h0_exact == [n]
    assert res.lines()[0] == f"H0: [{n}] stabilized=true"


@pytest.mark.parametrize("ctx", [Q3, Q5], ids=["q3", "q5"])
def test_chi_lt_and_unramified_twist(ctx):
    o = OperatorContext(ctx, 1)
    res = complex_cohomology(build_complex("lt", chi_lt_module(o)))
    assert res.factors == {0: [], 1: [1, 1], 2: [1]}
    res = complex_cohomology(build_complex("lt", character_module(o, -1, [1], 1)))
    assert res.factors == {0: [], 1: [1], 2: []}
    assert all(res.stabilized.values())


def test_euler_characteristic_rank2():
    o = OperatorContext(Q3, 2)
    res = complex_cohomology(build_complex("lt", rank2_constant_module(o)))
    lengths = {i: sum(f) for i, f in res.factors.items()}
    assert lengths[0] - lengths[1] + lengths[2] == -2 * 2


def test_h0_exact_examples():
    for ctx in (Q3, Q3_9, E5):
        for n in (1, 2, 3):
            o = OperatorContext(ctx, n)
            assert h0_exact(build_complex("lt", trivial_module(o))) == [n]
    o = OperatorContext(Q5, 2)
    u = Q5.elem(2, 2)
    assert h0_exact(build_complex("lt", character_module(o, u, [1], 1))) == []


def test_h0_exact_needs_certificate():
    o = OperatorContext(Q3, 1)
    with pytest.raises(NoCertificate):
        h0_exact(build_complex("lt-psi", trivial_module(o)))


def test_h0_exact_matches_windowed_on_tensor():
    o = OperatorContext(Q5, 2)
    M = tensor(chi_lt_module(o), chi_lt_module(o))
    C = build_complex("lt", M)
    res = complex_cohomology(C, degrees=[0])
    assert res.stabilized[0]
    assert res.factors[0] == h0_exact(C)


def test_monotone_stabilization():
    for ctx in (Q3, Q5):
        o = OperatorContext(ctx, 1)
        for M in (trivial_module(o), chi_lt_module(o), rank2_constant_module(o)):
            C = build_complex("lt", M)
            res = complex_cohomology(C, [8, 12, 16, 24])
            for i, h in res.history.items():
                if h[0] == h[1] == h[2]:
                    assert h[3] == h[2]


def test_psi_trivial_qp():
    o = OperatorContext(Q3, 1)
    r = psi_fixed_and_coker(trivial_module(o))
    assert r.constants_in_kernel
    assert r.kernel and r.kernel_stabilized and r.cokernel_stabilized


@pytest.mark.parametrize("ctx", [Q3_9, E5], ids=["q9", "e5"])
def test_psi_no_constants(ctx):
    o = OperatorContext(ctx, 1)
    r = psi_fixed_and_coker(trivial_module(o), [8, 16, 32])
    assert not r.constants_in_kernel


@pytest.mark.parametrize("ctx", [Q3, Q5, Q3_9], ids=["q3", "q5", "q9"])
def test_psi_core_iterations(ctx):
    o = OperatorContext(ctx, 1)
    schedule = [8, 16, 32]
    r = psi_fixed_and_coker(trivial_module(o), schedule)
    assert r.core_iterations <= math.log(max(schedule), ctx.q) + 2


@pytest.mark.parametrize("ctx", [Q3, Q5], ids=["q3", "q5"])
def test_h0_injectivity(ctx):
    o = OperatorContext(ctx, 2)
    for M in (trivial_module(o), chi_lt_module(o), rank2_constant_module(o)):
        F = phi_to_psi_morphism(build_complex("lt", M), build_complex("lt-psi", M))
        ok, before, after = h0_map_injective(F, 8)
        assert ok and before == after


def test_trivial_two_generators_h3_vanishes():
    o = OperatorContext(Q3_9, 1)
    C = build_complex("lt", trivial_module(o))
    res = complex_cohomology(C, [8, 16, 32], degrees=[3])
    assert res.factors[3] == [] and res.stabilized[3]
