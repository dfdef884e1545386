import numpy as np
import pytest

from thermovisco import discretization as dz
from thermovisco import lifting as lf
from thermovisco import mesh as fem


def _elastic_error(n):
    # manufactured u = (sin pi x sin pi y, 0) with lam = mu = 1 and g = 0
    m = fem.build_mesh(1.0, 1.0, n, n)
    D = dz.ElasticityTensor.isotropic(m, 1.0, 1.0)
    pi = np.pi

    def f(x, y):
        s, c = np.sin, np.cos
        # -div(lam tr(e) I + 2 mu e) for lam = mu = 1
        fx = 3 * pi ** 2 * s(pi * x) * s(pi * y) + pi ** 2 * s(pi * x) * s(pi * y)
        fy = -2 * pi ** 2 * c(pi * x) * c(pi * y)
        return fx, fy

    lift = lf.solve_static_elastic(m, D, f=f)
    exact = np.sin(pi * m.nodes[:, 0]) * np.sin(pi * m.nodes[:, 1])
    M = fem.scalar_mass(m)
    e = lift.u[:, 0] - exact
    e2 = lift.u[:, 1]
    return np.sqrt(e @ M @ e + e2 @ M @ e2), lift


def test_static_elastic_manufactured_rate():
    errs = [_elastic_error(n)[0] for n in (8, 16, 32)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7), rates


def test_static_elastic_zero_data_is_zero(mesh8):
    D = dz.ElasticityTensor.isotropic(mesh8, 1.0, 1.0)
    lift = lf.solve_static_elastic(mesh8, D)
    assert np.all(lift.u == 0) and lift.stress_max == 0


def test_static_elastic_stability_ratio_mesh_stable():
    r = [_elastic_error(n)[1].stability_ratio for n in (8, 16)]
    assert 0.5 < r[0] / r[1] < 2.0


def _heat_exact(x, y, t, w=1.3, ph=0.3):
    return np.exp(-w * w * t) * np.cos(w * x + ph)


def test_lifting_heat_manufactured():
    w, ph = 1.3, 0.3
    flux = lambda x, y, t, n: -w * np.exp(-w * w * t) * np.sin(w * x + ph) * n[..., 0]
    errs = []
    for n in (8, 16, 32):
        m = fem.build_mesh(1.0, 1.0, n, n)
        dt = 0.5 / n ** 2 * 8
        times = np.linspace(0, 0.25, int(round(0.25 / dt)) + 1)
        th0 = _heat_exact(m.nodes[:, 0], m.nodes[:, 1], 0.0)
        sol = lf.solve_lifting_heat(m, flux, th0, times)
        err = sol.theta[-1] - _heat_exact(m.nodes[:, 0], m.nodes[:, 1], times[-1])
        errs.append(np.sqrt(err @ fem.scalar_mass(m) @ err))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7), rates


def test_lifting_heat_zero_and_interpolation(mesh8):
    times = np.linspace(0, 1, 5)
    z = lf.solve_lifting_heat(mesh8, None, None, times)
    assert np.all(z.theta == 0) and z.stability_ratio == 0
    th0 = np.ones(mesh8.n_nodes)
    one = lf.solve_lifting_heat(mesh8, None, th0, times)
    # zero flux conserves the constant state
    np.testing.assert_allclose(one.theta, 1.0, atol=1e-12)
    np.testing.assert_allclose(one.at(0.1), 1.0, atol=1e-12)
