import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid as scipy_cumtrapz

from thermovisco import constitutive as cm
from thermovisco import diagnostics as dg
from thermovisco import evolution as ev
from thermovisco import lifting as lf
from thermovisco import orlicz as oz
from thermovisco.errors import InputError


def power_pair(p):
    M = oz.PowerNFunction(oz.Exponent.constant(p))
    return M, oz.complementary(M)


def test_cumulative_trapezoid_matches_scipy(rng):
    t = np.sort(rng.uniform(0, 3, 40))
    v = rng.standard_normal(40)
    np.testing.assert_allclose(dg.cumulative_trapezoid(v, t), scipy_cumtrapz(v, t, initial=0.0), rtol=1e-13)


@pytest.fixture(scope="module")
def lifted(bases16):
    load = lambda x, y: (np.sin(np.pi * y), 0 * x)
    return lf.solve_static_elastic(bases16.mesh, bases16.D, f=load)


def test_frozen_strain_budget_closed_form(bases16, lifted):
    # G = 0 and delta = 0: LHS = c t int M(T~d) and RHS = T int M((2/d) T~d).
    # For p = 2 and c = d = 1 the final margin is 3 T int M(T~d).
    M, Ms = power_pair(2.0)
    prob = ev.EvolutionProblem(bases16, cm.CustomG(lambda th, T, x: 0.0 * T, "zero"), ev.TruncationSpec(1.0),
                               lifted, None, M, Ms)
    s0 = ev.State(0.0, np.zeros(bases16.k), np.zeros(bases16.l), np.zeros(bases16.l))
    traj = ev.integrate(prob, s0, np.linspace(0, 2.0, 5))
    rep = dg.energy_budget(traj, lifted, bases16.mesh, M, Ms, 1.0)
    q = bases16.mesh.quadrature(4)
    m = float(q.weights @ M(q.points, lifted.stress_dev[q.element]))
    assert rep.margin[-1] == pytest.approx(3 * 2.0 * m, rel=1e-12)
    assert rep.passed and rep.monotone_accumulators()


def test_budget_holds_for_norton_hoff(bases16, lifted, rng):
    M, Ms = power_pair(2.0)
    model = cm.NortonHoff(2.0)
    prob = ev.EvolutionProblem(bases16, model, ev.TruncationSpec(8.0), lifted, None, M, Ms)
    s0 = ev.State(0.0, np.zeros(bases16.k), rng.standard_normal(bases16.l), np.zeros(bases16.l))
    traj = ev.integrate(prob, s0, np.linspace(0, 1.0, 51))
    rep = dg.energy_budget(traj, lifted, bases16.mesh, M, Ms, model.declared_c())
    assert rep.passed
    recs = {r.name: r for r in dg.standard_checks(traj, rep)}
    # the identity residual is a time-discretisation error, covered separately
    recs.pop("energy_identity")
    assert all(r.passed for r in recs.values()), recs
    audit = dg.audit_orlicz(traj)
    assert audit.fenchel_young_passed


def test_identity_residual_drops_with_dt(bases16, rng):
    prob = ev.EvolutionProblem(bases16, cm.NortonHoff(3.0), ev.TruncationSpec(8.0))
    s0 = ev.State(0.0, np.zeros(bases16.k), rng.standard_normal(bases16.l), np.zeros(bases16.l))
    res = []
    for n in (20, 40):
        traj = ev.integrate(prob, s0, np.linspace(0, 0.5, n + 1))
        res.append(np.abs(dg.energy_identity_residual(traj)).max())
    assert res[1] < res[0] / 3


def test_psi_probe_weight_and_defect(bases16, rng):
    assert dg.psi_weight(0.2, 0.5, 0.3) == 1.0
    assert dg.psi_weight(0.55, 0.5, 0.3) == pytest.approx(0.5)
    assert dg.psi_weight(2.0, 0.5, 0.3) == 0.0
    prob = ev.EvolutionProblem(bases16, cm.NortonHoff(2.0), ev.TruncationSpec(8.0))
    s0 = ev.State(0.0, np.zeros(bases16.k), rng.standard_normal(bases16.l), np.zeros(bases16.l))
    defects = []
    for n in (25, 50):
        traj = ev.integrate(prob, s0, np.linspace(0, 1.0, n + 1))
        pr = dg.psi_probe(traj, 0.33, 0.41)
        defects.append(pr.defect)
        assert pr.lhs >= 0
    assert defects[1] < defects[0]
    with pytest.raises(InputError):
        dg.psi_probe(traj, 0.5, 0.9)


def test_potential_energy_paths_agree(bases16, rng):
    s = ev.State(0.0, rng.standard_normal(bases16.k), rng.standard_normal(bases16.l), np.zeros(bases16.l))
    assert dg.potential_energy(s, bases16) == pytest.approx(dg.potential_energy(s, bases16, direct=True),
                                                           rel=1e-10)


def test_energy_budget_requires_positive_c(bases16, lifted):
    M, Ms = power_pair(2.0)
    prob = ev.EvolutionProblem(bases16, cm.NortonHoff(2.0), ev.TruncationSpec(1.0), lifted, None, M, Ms)
    s0 = ev.State(0.0, np.zeros(bases16.k), np.zeros(bases16.l), np.zeros(bases16.l))
    traj = ev.integrate(prob, s0, np.array([0.0, 0.1]))
    with pytest.raises(InputError):
        dg.energy_budget(traj, lifted, bases16.mesh, M, Ms, 0.0)
