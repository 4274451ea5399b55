from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from herrlt.okring import INF
from herrlt.series import (LaurentElem, MultiSeries, NonComposable, NotAUnit, ResidueOutsideWindow, l_derivative,
                           l_inv, l_residue, l_subst)

from conftest import Q3, Q3_9, Q5


def L(ctx, data, n, xprec=INF):
    return LaurentElem(ctx, data, n, xprec)


def test_monomial_inverse_pair():
    x = LaurentElem.X(Q3, 3)
    assert x * L(Q3, {-1: 1}, 3) == LaurentElem.constant(1, Q3, 3)


def test_difference_of_squares():
    a = L(Q3, {0: 1, 1: 1}, 3)
    b = L(Q3, {0: 1, 1: -1}, 3)
    assert a * b == L(Q3, {0: 1, 2: -1}, 3)


def test_pi_precision_takes_minimum():
    a = L(Q5, {0: 7}, 2)
    b = L(Q5, {1: 3}, 3)
    assert (a * b).n == 2
    assert (a + b).n == 2


def test_inverse_of_X():
    assert l_inv(LaurentElem.X(Q3, 2)) == L(Q3, {-1: 1}, 2)


def test_inverse_of_X_plus_pi():
    a = L(Q3, {1: 1, 0: 3}, 2)
    assert l_inv(a) == L(Q3, {-1: 1, -2: -3}, 2)


@pytest.mark.parametrize("ctx", [Q3, Q5, Q3_9], ids=["q3", "q5", "q9"])
def test_inverse_of_phi_factor(ctx):
    q = ctx.q
    a = L(ctx, {q - 1: 1, 0: ctx.pi(2)}, 2)
    expected = L(ctx, {1 - q: 1, 2 * (1 - q): -ctx.pi(2)}, 2)
    assert l_inv(a) == expected


def test_non_unit_has_no_inverse():
    with pytest.raises(NotAUnit):
        l_inv(L(Q3, {0: 3, 2: 6}, 3))


def test_subst_examples():
    X2 = L(Q5, {2: 1}, 3)
    assert l_subst(X2, L(Q5, {1: 2}, 3)) == L(Q5, {2: 4}, 3)
    c = LaurentElem.constant(4, Q5, 3)
    assert l_subst(c, L(Q5, {1: 1, 2: 1}, 3)) == c


def test_subst_inverse_geometric():
    f = L(Q3, {-1: 1}, 2)
    g = L(Q3, {1: 1, 2: 1}, 2)
    got = l_subst(f, g, xprec=6)
    # 1 / (X (1 + X)) = X^-1 - 1 + X - X^2 + ...
    expected = L(Q3, {k: (-1) ** (k + 1) for k in range(-1, 6)}, 2, 6)
    assert got.eq_window(expected)
    assert got.xprec == 6


def test_subst_rejects_constant_term():
    with pytest.raises(NonComposable):
        l_subst(LaurentElem.X(Q3, 2), L(Q3, {0: 1, 1: 1}, 2))


def test_residues():
    assert l_residue(L(Q3, {-1: 1}, 3)).is_one()
    d = l_derivative(L(Q3, {-1: 1}, 3))
    assert d == L(Q3, {-2: -1}, 3)
    assert l_residue(d).is_zero()
    assert l_residue(L(Q5, {-1: 3, 0: 5, 1: 1}, 3)) == Q5.elem(3, 3)


def test_residue_outside_window():
    with pytest.raises(ResidueOutsideWindow):
        l_residue(LaurentElem.zero(Q3, 2, -3))


def test_text_round_trip():
    a = L(Q3_9, {-3: [1, 2], 0: [4, 0], 5: [0, 8]}, 2, 11)
    b = LaurentElem.from_text(Q3_9, a.to_text())
    assert b == a
    assert b.to_text() == a.to_text()
    assert a.to_text().splitlines()[0] == "val=-3;xprec=11;pi_prec=2"
    exact = L(Q3, {0: 1}, 3)
    assert LaurentElem.from_text(Q3, exact.to_text()).to_text() == exact.to_text()


def test_multiseries_round_trip():
    F = MultiSeries(Q3, 2, {(1, 0): 1, (0, 1): 1, (2, 1): 17}, 4, 3)
    assert MultiSeries.from_text(Q3, F.to_text()) == F


def series(ctx, n, lo=-3, hi=5):
    coeff = st.integers(0, ctx.p ** n - 1)
    return st.dictionaries(st.integers(lo, hi), coeff, max_size=6).map(lambda d: L(ctx, d, n))


@settings(max_examples=80, deadline=None)
@given(series(Q5, 3), series(Q5, 3), series(Q5, 3))
def test_ring_laws(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert a - a == LaurentElem.zero(Q5, 3)


@settings(max_examples=60, deadline=None)
@given(series(Q3, 3, 0, 6))
def test_inverse_of_units(a):
    # force a unit constant term
    a = a - L(Q3, {0: a.coeff(0)}, 3) + LaurentElem.constant(1, Q3, 3)
    w = l_inv(a, 12)
    assert (a * w).eq_window(LaurentElem.constant(1, Q3, 3), 12)


def test_derivative_is_a_derivation():
    a = L(Q5, {-2: 3, 1: 1, 4: 2}, 3)
    b = L(Q5, {-1: 1, 3: 4}, 3)
    assert l_derivative(a * b) == l_derivative(a) * b + a * l_derivative(b)


def test_geometric_series_rational_oracle():
    # 1 / (1 - 3X) mod 27 through degree 5 vs exact rationals
    a = L(Q3, {0: 1, 1: -3}, 3)
    w = l_inv(a)
    for k in range(6):
        expected = Fraction(3) ** k
        assert w.coeff(k) == Q3.elem(int(expected) % 27, 3)
