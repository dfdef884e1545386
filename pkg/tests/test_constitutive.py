import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermovisco import constitutive as cm
from thermovisco import orlicz as oz
from thermovisco import tensors
from thermovisco.errors import InputError


def pair(p):
    M = oz.PowerNFunction(oz.Exponent.constant(p))
    return M, oz.complementary(M)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_monotonicity_min_gap(p, rng):
    model = cm.NortonHoff(p)
    rep = cm.check_monotonicity(model, n=10_000, rng=rng)
    assert rep.min_gap >= -1e-12 * model.scale and rep.passed


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_coercivity_declared_one_for_matched_unit_model(p, rng):
    model = cm.NortonHoff(p)
    assert model.declared_c() == pytest.approx(1.0, abs=1e-15)
    M, Ms = pair(p)
    rep = cm.check_coercivity(model, M, Ms, n=2000, rng=rng)
    assert rep.passed and rep.sampled_inf >= 1.0 * (1 - cm.COERCIVITY_RTOL)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1.2, 5.0))
def test_coercivity_ratio_is_one_at_unit_amplitude(scale, p):
    # a = 1: G:T = |T|^p and M + M* = |T|^p exactly
    assert cm.coercivity_ratio(1.0, p) == pytest.approx(1.0, rel=1e-14)
    assert cm.coercivity_ratio(scale, p) <= 1.0 + 1e-12


def test_auto_scale_maximises_declared_constant():
    e = oz.Exponent.constant(2.0)
    s = cm.auto_scale(e, (1.0, 1.5))
    assert s == pytest.approx(1 / np.sqrt(1.5), rel=1e-6)
    c = cm.declared_c(e, (1.0, 1.5), s)
    assert c == pytest.approx(2 * np.sqrt(1.5) / 2.5, rel=1e-6)
    for other in (0.7, 0.9):
        assert cm.declared_c(e, (1.0, 1.5), other) <= c + 1e-12


def test_norton_hoff_values_and_phi_clip():
    model = cm.NortonHoff(3.0, lambda th: 1 + th, (1.0, 2.0), scale=0.5)
    T = np.diag([1.0, -1.0, 0.0])
    x = np.zeros(2)
    r = np.sqrt(2.0)
    np.testing.assert_allclose(model(0.5, T, x), 0.5 * 1.5 * r * T)
    # negative theta evaluates phi at 0, large theta clips at the upper bound
    np.testing.assert_allclose(model(-3.0, T, x), 0.5 * 1.0 * r * T)
    np.testing.assert_allclose(model(10.0, T, x), 0.5 * 2.0 * r * T)
    np.testing.assert_array_equal(model(1.0, np.zeros((3, 3)), x), 0.0)


def test_eval_G_rejects_trace(rng):
    model = cm.NortonHoff(2.0)
    with pytest.raises(InputError):
        cm.eval_G(model, 0.0, np.eye(3), np.zeros(2))


def test_random_traceless(rng):
    T = cm.random_traceless(rng, 100, (0.5, 2.0))
    assert np.abs(tensors.trace(T)).max() < 1e-12
    n = tensors.norm(T)
    assert n.min() >= 0.5 - 1e-12 and n.max() <= 2.0 + 1e-12


def test_variable_exponent_declared_constant_is_sampled_lower_bound(rng):
    e = oz.Exponent.from_function(lambda x, y: 1.5 + 1.5 * x, (1.0, 1.0))
    model = cm.NortonHoff(e, lambda th: 0.5 + 0.15 * th, (0.5, 2.0), scale="auto")
    M = oz.PowerNFunction(e)
    rep = cm.check_coercivity(model, M, oz.complementary(M), n=2000,
                              points=rng.uniform(0, 1, (500, 2)), rng=rng)
    assert rep.passed
    assert rep.sampled_inf >= rep.declared_c * (1 - cm.COERCIVITY_RTOL)


def test_custom_flow_law_has_no_declared_constant():
    g = cm.CustomG(lambda th, T, x: T, "linear")
    assert g.declared_c() is None
