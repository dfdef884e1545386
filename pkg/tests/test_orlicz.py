import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermovisco import orlicz as oz
from thermovisco import tensors
from thermovisco.errors import DomainError, InputError, UnsupportedError


def power(p):
    return oz.PowerNFunction(oz.Exponent.constant(p))


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_numeric_legendre_matches_closed_form(p):
    prof = lambda r: np.abs(r) ** p / p
    eta = oz.conjugate_grid(prof, oz.DEFAULT_RADIAL_GRID)
    q = p / (p - 1)
    exact = eta ** q / q
    num = oz.legendre_radial(prof, eta)
    ok = exact > 0
    assert np.max(np.abs(num[ok] - exact[ok]) / exact[ok]) <= 1e-6


def test_tabulated_conjugate_agrees_with_closed_form(rng):
    M = power(3.0)
    num = oz.complementary(M, closed_form=False)
    exact = oz.complementary(M)
    x = np.zeros((200, 2))
    eta = oz._random_sym(rng, 200) * np.exp(rng.uniform(-2, 2, 200))[:, None, None]
    np.testing.assert_allclose(num(x, eta), exact(x, eta), rtol=1e-6)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_luxemburg_constant_field(p, mesh8):
    # int (|A|/lam)^p / p = 1 over the unit square => lam = |A| p^(-1/p)
    M = power(p)
    q = mesh8.quadrature(2)
    A = np.diag([0.7, -0.2, -0.5])
    field = np.broadcast_to(A, (len(q.weights), 3, 3))
    lam = oz.luxemburg_norm(M, field, q.points, q.weights)
    assert np.isclose(lam, tensors.norm(A) * p ** (-1 / p), rtol=1e-8)


def test_orlicz_norm_brackets_luxemburg(mesh8, rng):
    M = power(2.5)
    q = mesh8.quadrature(2)
    field = oz._random_sym(rng, len(q.weights))
    rep = oz.modular_report(M, field, q.points, q.weights)
    assert rep.bracket_ok


def test_fenchel_young_gap_nonnegative(rng):
    for p in (1.5, 2.0, 3.0):
        M = power(p)
        Ms = oz.complementary(M)
        x = np.zeros((10_000, 2))
        xi = oz._random_sym(rng, 10_000) * np.exp(rng.uniform(-3, 3, 10_000))[:, None, None]
        eta = oz._random_sym(rng, 10_000) * np.exp(rng.uniform(-3, 3, 10_000))[:, None, None]
        assert oz.fenchel_young_gap(M, Ms, x, xi, eta).min() >= -1e-10


def test_fenchel_young_equality_at_gradient(rng):
    # equality holds for eta = |xi|^(p-2) xi
    p = 3.0
    M, Ms = power(p), oz.complementary(power(p))
    xi = oz._random_sym(rng, 100)
    eta = tensors.norm(xi)[:, None, None] ** (p - 2) * xi
    gap = oz.fenchel_young_gap(M, Ms, np.zeros((100, 2)), xi, eta)
    np.testing.assert_allclose(gap, 0.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.1, 6.0))
def test_nfunction_conditions_power_family(p):
    rep = oz.check_nfunction(power(p), np.zeros((1, 2)))
    assert all(rep.values()), rep


def test_variable_exponent_and_domain(rng):
    e = oz.Exponent.from_function(lambda x, y: 2.0 + x, (1.0, 1.0))
    assert np.isclose(e.p_min, 2.0) and np.isclose(e.p_max, 3.0)
    c = e.conjugate()
    assert np.isclose(c.p_min, 1.5) and np.isclose(c.p_max, 2.0)
    M = oz.PowerNFunction(e)
    xi = np.diag([1.0, -1.0, 0.0]) * 2.0
    val = M(np.array([[0.5, 0.2]]), xi[None])
    r = tensors.norm(xi)
    assert np.isclose(val[0], r ** 2.5 / 2.5)
    with pytest.raises(DomainError):
        e(np.array([[1.5, 0.0]]))


def test_exponent_rejects_invalid_range():
    with pytest.raises(InputError):
        oz.Exponent.constant(1.0)


def test_delta2_power_exact_and_exponential_growth(rng):
    rep = oz.check_delta2(power(3.0), np.zeros((1, 2)), np.zeros((1, 3, 3)))
    assert rep.satisfied and rep.c_estimate == 8.0
    M = oz.RadialNFunction(lambda r: np.expm1(np.abs(r) ** 2) , name="exp")
    xi = oz._random_sym(rng, 2000) * np.geomspace(1e-2, 4.0, 2000)[:, None, None]
    xi /= tensors.norm(oz._random_sym(rng, 1))[0]
    rep = oz.check_delta2(M, np.zeros((2000, 2)), xi)
    assert not rep.satisfied


def test_quadratic_bound_gate():
    ok = oz.check_quadratic_bound(oz.complementary(power(2.0)), np.zeros((3, 2)))
    assert ok.passed and np.isclose(ok.worst_ratio, 0.5)
    # p = 1.2 gives p' = 6: M*(3) = 3^6/6 far above 9
    bad = oz.check_quadratic_bound(oz.complementary(power(1.2)), np.zeros((3, 2)))
    assert not bad.passed


def test_numeric_conjugate_of_variable_exponent_unsupported():
    e = oz.Exponent.from_function(lambda x, y: 2.0 + x, (1.0, 1.0))
    with pytest.raises(UnsupportedError):
        oz.complementary(oz.PowerNFunction(e), closed_form=False)
