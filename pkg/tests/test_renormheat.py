import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermovisco import mesh as fem
from thermovisco import renormheat as rh
from thermovisco.errors import InputError


@given(st.floats(-1e3, 1e3), st.floats(0.01, 50))
def test_tilde_T_properties(r, K):
    t = float(rh.tilde_T(r, K))
    tk = float(rh.truncate(r, K))
    assert t >= 0.5 * tk * tk - 1e-9 * (1 + t)
    h = 1e-6 * max(1.0, abs(r))
    if abs(abs(r) - K) > 2 * h:
        slope = (rh.tilde_T(r + h, K) - rh.tilde_T(r - h, K)) / (2 * h)
        assert slope == pytest.approx(tk, rel=1e-5, abs=1e-5)


def test_cutoff_shape():
    u = np.linspace(0, 1.5, 301)
    c = rh.cutoff(u)
    assert np.all(c[u <= 0.5] == 1.0) and np.all(c[u >= 1.0] == 0.0)
    assert np.all(np.diff(c) <= 1e-15)
    h = 1e-6
    fd = (rh.cutoff(u[1:-1] + h) - rh.cutoff(u[1:-1] - h)) / (2 * h)
    np.testing.assert_allclose(rh.cutoff_prime(u[1:-1]), fd, atol=1e-6)


def test_smooth_clamp_is_primitive_of_cutoff():
    from scipy.integrate import quad
    S = rh.SmoothClamp(2.0)
    for r in (0.3, 1.2, 1.7, 2.0, 5.0):
        ref = quad(lambda s: float(rh.cutoff(s / 2.0)), 0, min(r, 2.0), epsabs=1e-13)[0]
        assert float(S(r)) == pytest.approx(ref, abs=1e-10)
        assert float(S(-r)) == pytest.approx(-ref, abs=1e-10)
    assert float(S.prime(0.9)) == 1.0 and float(S.prime(2.5)) == 0.0


def _problem(mesh, n_t=21, T=0.2, source=None, theta0=None):
    times = np.linspace(0, T, n_t)
    th0 = np.zeros(mesh.n_nodes) if theta0 is None else theta0
    return rh.HeatProblem(mesh, times, source, th0)


def test_mass_conservation(mesh8):
    x, y = mesh8.nodes[:, 0], mesh8.nodes[:, 1]
    src = lambda x, y, t: 1.0 + x * y
    sol = rh.solve_truncated(_problem(mesh8, source=src, theta0=np.cos(np.pi * x)))
    m = rh.lumped_masses(mesh8)
    q = mesh8.quadrature(4)
    f_int = float(q.weights @ (1.0 + q.points[:, 0] * q.points[:, 1]))
    mass = sol.theta @ m
    np.testing.assert_allclose(mass - mass[0], f_int * sol.times, atol=1e-12)


def test_order_preservation_and_l1_contraction(mesh8, rng):
    a = rng.uniform(-1, 1, mesh8.n_nodes)
    b = a + rng.uniform(0, 1, mesh8.n_nodes)
    sa = rh.solve_truncated(_problem(mesh8, theta0=a))
    sb = rh.solve_truncated(_problem(mesh8, theta0=b))
    assert np.min(sb.theta - sa.theta) >= -1e-13
    d = np.abs(sa.theta - sb.theta) @ rh.lumped_masses(mesh8)
    assert np.all(np.diff(d) <= 1e-13)


def test_manufactured_space_convergence():
    # theta = exp(-2 pi^2 t) cos(pi x) cos(pi y), zero source
    errs = []
    for n in (8, 16, 32):
        m = fem.build_mesh(1.0, 1.0, n, n)
        x, y = m.nodes[:, 0], m.nodes[:, 1]
        nt = n * n // 4 * 2
        prob = rh.HeatProblem(m, np.linspace(0, 0.05, nt + 1), None, np.cos(np.pi * x) * np.cos(np.pi * y))
        sol = rh.solve_truncated(prob)
        ex = np.exp(-2 * np.pi ** 2 * 0.05) * np.cos(np.pi * x) * np.cos(np.pi * y)
        e = sol.theta[-1] - ex
        errs.append(np.sqrt(e @ fem.scalar_mass(m) @ e))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7), rates


def test_truncation_energy_and_tail(mesh8):
    data = rh.SingularData()
    times = np.linspace(0, 0.5, 26)
    sol = rh.solve_truncated(data.problem(mesh8, times, 0.05))
    for K in (0.5, 1, 4):
        assert rh.truncation_energy(sol, K).passed
    tails = [rh.truncation_tail(sol, K, 1.0) for K in (1, 2, 4, 8, 64)]
    assert np.all(np.diff(tails) <= 1e-14)
    assert tails[-1] == 0.0


def test_cauchy_bound_and_comparison(mesh8):
    data = rh.SingularData()
    times = np.linspace(0, 0.5, 26)
    pa, pb = data.problem(mesh8, times, 0.2), data.problem(mesh8, times, 0.05)
    sa, sb = rh.solve_truncated(pa), rh.solve_truncated(pb)
    rec = rh.cauchy_pair(sa, sb, 0.2, 0.05)
    assert rec.passed and rec.distance <= rec.bound * (1 + 1e-12)
    # smaller eps truncates higher: ordered data
    assert rh.comparison(pa, pb, sa, sb) >= -1e-8
    with pytest.raises(InputError):
        rh.comparison(pb, pa)


def test_constant_S_residual_telescopes(mesh8):
    data = rh.SingularData()
    sol = rh.solve_truncated(data.problem(mesh8, np.linspace(0, 1, 11), 0.1))
    for phi in rh.builtin_test_functions(1.0):
        assert abs(rh.renorm_residual(sol, rh.ConstantS(2.0), phi)) < 1e-12


def test_residual_needs_vanishing_test_function(mesh8):
    sol = rh.solve_truncated(_problem(mesh8))
    phi = rh.TestFunction(lambda x, y: np.ones_like(x), lambda t: 1.0 + 0 * np.asarray(t), "bad")
    with pytest.raises(InputError):
        rh.renorm_residual(sol, rh.SmoothClamp(1.0), phi)


def test_singular_data_validation():
    with pytest.raises(InputError):
        rh.SingularData(a=2.0)
