import pytest

from herrlt.complexes import (ComplexError, OperatorExpr, build_complex, chain_map_residual, d2_residual, d2_symbolic,
                              gamma_tilde_ratio, gamma_tilde_ratio_matrix, gt_power_matrix, koszul_gamma,
                              phi_to_psi_morphism)
from herrlt.frobpsi import OperatorContext
from herrlt.okring import INF
from herrlt.phigamma import (chi_lt_module, ft_unipotent_module, mat_add, mat_identity, mat_mul, mat_sub,
                             rank2_constant_module, trivial_module)

from conftest import Q2_4, Q3, Q3_9, Q5


@pytest.fixture(scope="module")
def o9():
    return OperatorContext(Q3_9, 2)


@pytest.fixture(scope="module")
def o3():
    return OperatorContext(Q3, 2)


class Ops:
    """Shorthand for building expected entries."""

    def __init__(self, ctx, n):
        self.ctx, self.n = ctx, n
        self.I = OperatorExpr.identity(ctx, n)
        self.Z = OperatorExpr.zero(ctx, n)
        self.phi = OperatorExpr.atom(ctx, n, "phi") - self.I
        self.psi = OperatorExpr.atom(ctx, n, "psi") - OperatorExpr.identity(ctx, n, ctx.q_over_pi(n))

    def g(self, i):
        return OperatorExpr.atom(self.ctx, self.n, "gamma", i - 1) - self.I

    def gt(self, a=1):
        return OperatorExpr.atom(self.ctx, self.n, "gt", a) - self.I

    def ratio(self, a, b):
        return OperatorExpr.atom(self.ctx, self.n, "ratio", a, b)

    def gr(self, i, a, b):
        # gamma_i - (gt^a - 1)/(gt^b - 1)
        return OperatorExpr.atom(self.ctx, self.n, "gamma", i - 1) - self.ratio(a, b)


def blocks_equal(got, expected):
    assert len(got) == len(expected)
    for rg, re in zip(got, expected):
        assert len(rg) == len(re)
        for a, b in zip(rg, re):
            if a != b:
                return False
    return True


def test_koszul_d1(o3):
    C = koszul_gamma(trivial_module(o3))
    e = Ops(o3.ctx, 2)
    assert C.ranks() == [1, 1]
    assert blocks_equal(C.block(0), [[e.g(1)]])


def test_koszul_d2(o9):
    C = koszul_gamma(trivial_module(o9))
    e = Ops(o9.ctx, 2)
    assert C.ranks() == [1, 2, 1]
    assert blocks_equal(C.block(0), [[e.g(1)], [e.g(2)]])
    assert blocks_equal(C.block(1), [[-e.g(2), e.g(1)]])
    assert d2_residual(C, samples=30) == INF


def test_herr_lt_d1(o3):
    C = build_complex("lt", trivial_module(o3))
    e = Ops(o3.ctx, 2)
    assert C.ranks() == [1, 2, 1]
    assert blocks_equal(C.block(0), [[e.phi], [e.g(1)]])
    assert blocks_equal(C.block(1), [[-e.g(1), e.phi]])


def test_herr_lt_d2_blocks(o9):
    C = build_complex("lt", trivial_module(o9))
    e = Ops(o9.ctx, 2)
    assert C.ranks() == [1, 3, 3, 1]
    assert blocks_equal(C.block(0), [[e.phi], [e.g(1)], [e.g(2)]])
    assert blocks_equal(C.block(1), [[-e.g(1), e.phi, e.Z],
                                     [-e.g(2), e.Z, e.phi],
                                     [e.Z, -e.g(2), e.g(1)]])
    assert blocks_equal(C.block(2), [[e.g(2), -e.g(1), e.phi]])


def test_herr_psi_d2_blocks(o9):
    C = build_complex("lt-psi", trivial_module(o9))
    e = Ops(o9.ctx, 2)
    assert blocks_equal(C.block(0), [[e.psi], [e.g(1)], [e.g(2)]])
    assert blocks_equal(C.block(1), [[-e.g(1), e.psi, e.Z],
                                     [-e.g(2), e.Z, e.psi],
                                     [e.Z, -e.g(2), e.g(1)]])
    assert blocks_equal(C.block(2), [[e.g(2), -e.g(1), e.psi]])


def test_herr_ft_d2_blocks(o9):
    a1, a2 = 4, 7
    C = build_complex("ft", ft_unipotent_module(o9, exponents=[a1, a2]))
    e = Ops(o9.ctx, 2)
    Z = e.Z
    assert C.ranks() == [1, 4, 6, 4, 1]
    assert blocks_equal(C.block(0), [[e.phi], [e.g(1)], [e.g(2)], [e.gt()]])
    assert blocks_equal(C.block(1), [
        [-e.g(1), e.phi, Z, Z],
        [-e.g(2), Z, e.phi, Z],
        [-e.gt(), Z, Z, e.phi],
        [Z, -e.g(2), e.g(1), Z],
        [Z, e.gt(a1), Z, -e.gr(1, a1, 1)],
        [Z, Z, e.gt(a2), -e.gr(2, a2, 1)],
    ])
    assert blocks_equal(C.block(2), [
        [e.g(2), -e.g(1), Z, e.phi, Z, Z],
        [-e.gt(a1), Z, e.gr(1, a1, 1), Z, e.phi, Z],
        [Z, -e.gt(a2), e.gr(2, a2, 1), Z, Z, e.phi],
        [Z, Z, Z, e.gt(a1 * a2), e.gr(2, a1 * a2, a1), -e.gr(1, a1 * a2, a2)],
    ])
    assert blocks_equal(C.block(3), [[-e.gt(a1 * a2), -e.gr(2, a1 * a2, a1), e.gr(1, a1 * a2, a2), e.phi]])


def test_ft_gamma_part_d2(o9):
    # the phi-free rows and columns form the Koszul complex of Gamma_LT,FT
    a1, a2 = 4, 7
    C = build_complex("ft", ft_unipotent_module(o9, exponents=[a1, a2]))
    e = Ops(o9.ctx, 2)

    def sub(i):
        rows = [r for r, T in enumerate(C.terms[i + 1]) if "phi" not in T]
        cols = [c for c, S in enumerate(C.terms[i]) if "phi" not in S]
        return [[C.block(i)[r][c] for c in cols] for r in rows]

    assert blocks_equal(sub(0), [[e.g(1)], [e.g(2)], [e.gt()]])
    assert blocks_equal(sub(1), [[-e.g(2), e.g(1), e.Z],
                                 [e.gt(a1), e.Z, -e.gr(1, a1, 1)],
                                 [e.Z, e.gt(a2), -e.gr(2, a2, 1)]])
    assert blocks_equal(sub(2), [[e.gt(a1 * a2), e.gr(2, a1 * a2, a1), -e.gr(1, a1 * a2, a2)]])


def test_iwasawa_shape(o3):
    C = build_complex("iwasawa", trivial_module(o3))
    e = Ops(o3.ctx, 2)
    assert C.ranks() == [1, 1]
    assert blocks_equal(C.block(0), [[OperatorExpr.atom(o3.ctx, 2, "psi") - e.I]])


CASES = [(Q3, None), (Q5, None), (Q3_9, [4, 7])]


@pytest.mark.parametrize("ctx,exps", CASES, ids=["q3", "q5", "q9"])
@pytest.mark.parametrize("kind", ["lt", "lt-psi", "ft", "ft-psi"])
def test_d_squared_vanishes(ctx, exps, kind):
    o = OperatorContext(ctx, 2)
    samples = 10 if o.d == 2 else 30
    mods = [chi_lt_module(o), rank2_constant_module(o)] if not kind.startswith("ft") else \
        [ft_unipotent_module(o, exponents=exps)]
    for M in mods:
        C = build_complex(kind, M)
        assert d2_residual(C, samples=samples, seed=1) == INF
        if not kind.startswith("ft"):
            assert d2_symbolic(C)


def test_d_squared_detects_sign_error(o3):
    C = build_complex("lt", chi_lt_module(o3))
    C.differentials[1][0][0] = -C.differentials[1][0][0]
    assert d2_residual(C, samples=3) < INF


def test_p2_rejected():
    o = OperatorContext(Q2_4, 1)
    with pytest.raises(ComplexError):
        build_complex("lt", trivial_module(o))


def test_unknown_kind(o3):
    with pytest.raises(ComplexError):
        build_complex("nope", trivial_module(o3))


def test_ft_needs_gamma_tilde(o3):
    with pytest.raises(ComplexError):
        build_complex("ft", trivial_module(o3))


def test_minus_psi_after_phi_minus_one(o3):
    e = Ops(o3.ctx, 2)
    lhs = (-OperatorExpr.atom(o3.ctx, 2, "psi")).compose(e.phi)
    assert lhs == e.psi


def test_middle_map_d2(o9):
    M = trivial_module(o9)
    F = phi_to_psi_morphism(build_complex("lt", M), build_complex("lt-psi", M))
    e = Ops(o9.ctx, 2)
    minus_psi = -OperatorExpr.atom(o9.ctx, 2, "psi")
    assert blocks_equal(F.blocks[0], [[e.I]])
    assert blocks_equal(F.blocks[1], [[minus_psi, e.Z, e.Z], [e.Z, e.I, e.Z], [e.Z, e.Z, e.I]])
    assert blocks_equal(F.blocks[3], [[minus_psi]])


@pytest.mark.parametrize("ctx", [Q3, Q5, Q3_9], ids=["q3", "q5", "q9"])
def test_chain_map_residual(ctx):
    o = OperatorContext(ctx, 2)
    samples = 10 if o.d == 2 else 30
    for M in (chi_lt_module(o), rank2_constant_module(o)):
        F = phi_to_psi_morphism(build_complex("lt", M), build_complex("lt-psi", M))
        assert chain_map_residual(F, samples=samples, seed=2) == INF


def test_gamma_tilde_ratio_examples(o3):
    M = ft_unipotent_module(o3, b=1)
    ctx = o3.ctx
    assert gamma_tilde_ratio(M, 1) == OperatorExpr.identity(ctx, 2)
    B = M.GammaTilde
    I = mat_identity(ctx, 2, 2)
    assert gamma_tilde_ratio_matrix(M, 2, 1) == mat_add(B, I)
    a = 1 + ctx.p
    R = gamma_tilde_ratio_matrix(M, a, 1)
    power = I
    for _ in range(a):
        power = mat_mul(power, B)
    assert mat_mul(R, mat_sub(B, I)) == mat_sub(power, I)
    assert gt_power_matrix(M, a) == power


def test_complex_listing_is_deterministic(o9):
    M = ft_unipotent_module(o9, exponents=[4, 7])
    a = build_complex("ft", M).to_text()
    b = build_complex("ft", ft_unipotent_module(o9, exponents=[4, 7])).to_text()
    assert a == b
    assert "ranks=1,4,6,4,1" in a
