import random

import pytest

from herrlt.complexes import random_elem
from herrlt.frobpsi import OperatorContext
from herrlt.phigamma import (ModuleError, character_module, chi_lt_module, delta_project, dual, ft_unipotent_module,
                             mat_const, module_from_text, module_to_text, psi_module, rank2_constant_module,
                             residue_pairing, tensor, trivial_module, validate, EtaleModule)
from herrlt.series import LaurentElem

from conftest import E5, ODD_FIELDS, Q3, Q3_9


@pytest.fixture(scope="module", params=sorted(ODD_FIELDS), ids=lambda k: f"ctx={k}")
def octx(request):
    return OperatorContext(ODD_FIELDS[request.param], 2)


def builtins(o):
    mods = [trivial_module(o), chi_lt_module(o), character_module(o, -1, [1] * o.d, 1), rank2_constant_module(o)]
    if all(not any(a.coeffs[1:]) for a in o.gamma_gens):
        mods.append(ft_unipotent_module(o))
    return mods


def same_matrices(A, B):
    return all(x == y for ra, rb in zip(A, B) for x, y in zip(ra, rb))


def test_trivial_validates(octx):
    rep = validate(trivial_module(octx))
    assert rep.ok
    assert "FAIL" not in str(rep)


def test_diag_X_is_etale():
    o = OperatorContext(Q3, 2)
    ctx = o.ctx
    X = LaurentElem.X(ctx, 2)
    M = EtaleModule(o, [[X]], [mat_const(ctx, [[1]], 2)], mat_const(ctx, [[1]], 2))
    assert validate(M).items[0] == ("etale det(Phi) unit", True, float("inf"))


def test_diag_pi_is_not_etale():
    o = OperatorContext(Q3, 2)
    ctx = o.ctx
    M = EtaleModule(o, mat_const(ctx, [[ctx.pi(2)]], 2), [mat_const(ctx, [[1]], 2)], mat_const(ctx, [[1]], 2))
    rep = validate(M)
    assert not rep.ok
    assert "etale det(Phi) unit: FAIL" in str(rep)


def test_builtins_validate(octx):
    for M in builtins(octx):
        assert validate(M).ok, M.name


def test_chi_one_is_trivial(octx):
    M = character_module(octx, 1, [1] * octx.d, 1)
    T = trivial_module(octx)
    assert same_matrices(M.Phi, T.Phi) and same_matrices(M.Delta, T.Delta)
    assert all(same_matrices(a, b) for a, b in zip(M.Gamma, T.Gamma))


def test_character_rejects_bad_data():
    o = OperatorContext(Q3, 2)
    with pytest.raises(ModuleError):
        character_module(o, 3, [1], 1)
    with pytest.raises(ModuleError):
        character_module(o, 1, [1], 5)


def test_tensor_with_trivial(octx):
    M = chi_lt_module(octx)
    T = tensor(trivial_module(octx), M)
    assert same_matrices(T.Phi, M.Phi)
    assert all(same_matrices(a, b) for a, b in zip(T.Gamma, M.Gamma))


def test_dual_of_trivial_is_chi_lt(octx):
    D = dual(trivial_module(octx))
    C = chi_lt_module(octx)
    assert same_matrices(D.Phi, C.Phi) and same_matrices(D.Delta, C.Delta)
    assert all(same_matrices(a, b) for a, b in zip(D.Gamma, C.Gamma))


def test_double_dual(octx):
    for M in builtins(octx):
        DD = dual(dual(M))
        assert same_matrices(DD.Phi, M.Phi)
        assert all(same_matrices(a, b) for a, b in zip(DD.Gamma, M.Gamma))


def test_tensor_rank():
    o = OperatorContext(Q3, 2)
    ctx = o.ctx
    I3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    M3 = EtaleModule(o, mat_const(ctx, [[1, 1, 0], [0, 1, 0], [0, 0, -1]], 2), [mat_const(ctx, I3, 2)],
                     mat_const(ctx, I3, 2))
    assert validate(M3).ok
    T = tensor(rank2_constant_module(o), M3)
    assert T.rank == 6
    assert validate(T).ok


def random_module(o, rng):
    ctx, n = o.ctx, o.n
    N = ctx.abs_prec(n)

    def unit():
        while True:
            u = ctx.elem([rng.randrange(ctx.p ** N) for _ in range(ctx.D)], n)
            if u.is_unit():
                return u

    def one_mod_pi():
        return ctx.one(n) + ctx.pi(n) * ctx.elem([rng.randrange(ctx.p ** N) for _ in range(ctx.D)], n)

    if rng.random() < 0.5:
        return character_module(o, unit(), [one_mod_pi() for _ in range(o.d)], 1)
    c = ctx.elem([rng.randrange(ctx.p ** N) for _ in range(ctx.D)], n)
    return EtaleModule(o, mat_const(ctx, [[unit(), c], [0, unit()]], n),
                       [mat_const(ctx, [[1, 0], [0, 1]], n) for _ in range(o.d)], mat_const(ctx, [[1, 0], [0, 1]], n))


def test_validation_closed_under_tensor_and_dual():
    rng = random.Random(11)
    for ctx in (Q3, Q3_9):
        o = OperatorContext(ctx, 2)
        mods = [random_module(o, rng) for _ in range(10)]
        for M in mods:
            assert validate(M).ok
            assert validate(dual(M)).ok
        for A, B in zip(mods, mods[1:]):
            assert validate(tensor(A, B)).ok


def test_delta_projection_of_monomials(octx):
    M = trivial_module(octx)
    q = octx.q
    for j in range(-2 * q, 2 * q + 1):
        m = M.elem([{j: 1}])
        got = delta_project(M, m)
        expected = m if j % (q - 1) == 0 else M.elem([{}])
        assert got.eq_window(expected), j


def test_delta_projection_idempotent_and_equivariant(octx):
    rng = random.Random(5)
    cap = 40
    for M in builtins(octx)[:3]:
        for _ in range(20 if M.name == "trivial" else 4):
            m = random_elem(M, rng)
            e = M.delta_project(m, cap)
            assert M.delta_project(e, cap).eq_window(e, cap)
            assert M.delta_project(M.phi_M(m), cap).eq_window(M.phi_M(e), cap)
            assert M.delta_project(M.gamma_M(0, m, cap), cap).eq_window(M.gamma_M(0, e, cap), cap)
    one = trivial_module(octx).elem([1])
    assert delta_project(trivial_module(octx), one).eq_window(one)


def test_psi_trivial_is_scalar_psi(octx):
    M = trivial_module(octx)
    rng = random.Random(2)
    for _ in range(10):
        m = random_elem(M, rng)
        assert psi_module(M, m).coords[0] == octx.psi(m.coords[0])


def test_psi_after_phi(octx):
    rng = random.Random(3)
    for M in builtins(octx):
        for _ in range(5):
            m = random_elem(M, rng)
            assert M.psi_M(M.phi_M(m)).eq_window(m.scale(octx.q_over_pi))


def test_psi_gamma_commute(octx):
    rng = random.Random(4)
    cap = 30
    for M in builtins(octx):
        m = random_elem(M, rng)
        lhs = M.psi_M(M.gamma_M(0, m, cap * octx.q))
        rhs = M.gamma_M(0, M.psi_M(m), cap)
        assert lhs.eq_window(rhs, cap)


def test_psi_character(octx):
    ctx, n = octx.ctx, octx.n
    u = ctx.elem(-1, n) + ctx.pi(n)
    M = character_module(octx, u, [1] * octx.d, 1)
    got = M.psi_M(M.elem([1]))
    assert got.coords[0] == LaurentElem.constant(octx.q_over_pi * u.inv(), ctx, n)


def test_pairing_examples(octx):
    M = trivial_module(octx)
    D = dual(M)
    assert residue_pairing(M, M.elem([1]), D.elem([{-1: 1}])).is_one()
    assert residue_pairing(M, M.elem([1]), D.elem([1])).is_zero()


def test_pairing_invariance_and_adjunction(octx):
    rng = random.Random(8)
    cap = 40
    nonzero = 0
    for M in builtins(octx):
        Md = dual(M)
        for _ in range(10):
            m = random_elem(M, rng, -2, 3)
            F = random_elem(Md, rng, -4, 3)
            base = residue_pairing(M, m, F)
            nonzero += not base.is_zero()
            moved = residue_pairing(M, M.gamma_M(0, m, cap), Md.gamma_M(0, F, cap))
            assert moved == base
            assert residue_pairing(M, M.phi_M(m), F) == residue_pairing(M, m, Md.psi_M(F))
    assert nonzero > 0


def test_module_text_round_trip(octx):
    for M in builtins(octx):
        text = module_to_text(M)
        back = module_from_text(text)
        assert module_to_text(back) == text
        assert same_matrices(back.Phi, M.Phi)


def test_module_text_round_trip_eisenstein():
    o = OperatorContext(E5, 1)
    M = chi_lt_module(o)
    assert module_to_text(module_from_text(module_to_text(M))) == module_to_text(M)
