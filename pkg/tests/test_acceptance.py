"""End-to-end acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line (visible with
``pytest -v`` thanks to ``capsys.disabled``).
"""
import numpy as np
import pytest

from thermovisco import constitutive as cm
from thermovisco import diagnostics as dg
from thermovisco import discretization as dz
from thermovisco import io
from thermovisco import mesh as fem
from thermovisco import orlicz as oz
from thermovisco import renormheat as rh
from thermovisco import runner
from thermovisco import scenario as sc
from thermovisco import tensors

EVOLUTION_SCENARIOS = ("zero", "smooth_p2", "norton_hoff_p3", "variable_exponent")


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def shipped():
    from thermovisco.cli import shipped_scenarios
    return {name: sc.load(path) for name, path in shipped_scenarios().items()}


@pytest.fixture(scope="module")
def renorm_study(shipped, tmp_path_factory):
    return runner.renormheat_study(shipped["singular_renormheat"], tmp_path_factory.mktemp("renorm"))


def test_criterion_1_basis_integrity(capsys):
    worst = 0.0
    for n, k, l in ((8, 8, 8), (16, 16, 16), (32, 32, 32)):
        m = fem.build_mesh(1.0, 1.0, n, n)
        D = dz.ElasticityTensor.isotropic(m, 1.0, 1.0)
        rep = dz.build_bases(m, D, k, l, check=False).gram_report()
        worst = max(worst, max(v for key, v in rep.items() if key != "mu_first"), abs(rep["mu_first"]))
    errs = []
    for n in (8, 16, 32):
        _, mu = dz.neumann_eigenbasis(fem.build_mesh(1.0, 1.0, n, n), 4)
        errs.append(abs(mu[3] - 2 * np.pi ** 2))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = worst <= 1e-8 and bool(np.all(np.abs(rates - 2.0) <= 0.3))
    report(capsys, 1, ok, f"max Gram deviation {worst:.2e} (<= 1e-8); eigenvalue rates {np.round(rates, 3)}")


def test_criterion_2_discrete_equilibrium(capsys, shipped, tmp_path):
    worst_margin = np.inf
    for name in EVOLUTION_SCENARIOS:
        res = runner.run_evolution(shipped[name], tmp_path / name, checks="energy")
        rec = next(r for r in res.records if r.name == "discrete_equilibrium")
        worst_margin = min(worst_margin, rec.margin)
    report(capsys, 2, worst_margin >= 0,
           f"min margin of 1e-10(1+|T|) - max|int T:eps(w_n)| over {len(EVOLUTION_SCENARIOS)} scenarios: "
           f"{worst_margin:.3e}")


def test_criterion_3_energy_identity(capsys, shipped, tmp_path):
    base = shipped["smooth_p2"]
    res = []
    dts = (0.04, 0.02, 0.01, 0.005)
    for dt in dts:
        r = runner.run_evolution(base.with_overrides(discretization__dt=dt), tmp_path / f"dt{dt}", checks="energy")
        res.append(next(c for c in r.records if c.name == "energy_identity").value)
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    fine = runner.run_evolution(base.with_overrides(discretization__dt=1e-3, discretization__output_stride=1000),
                                tmp_path / "fine", checks="energy")
    fine_res = next(c for c in fine.records if c.name == "energy_identity").value
    ok = bool(np.all(np.abs(orders - 2.0) <= 0.3)) and fine_res <= 1e-6
    report(capsys, 3, ok, f"orders {np.round(orders, 3)}; residual at dt=1e-3: {fine_res:.2e} (<= 1e-6)")


def test_criterion_4_energy_inequality(capsys, shipped, tmp_path):
    lines, ok = [], True
    for name in EVOLUTION_SCENARIOS:
        scen = shipped[name].with_overrides(study__sweep_kl=[(4, 4), (8, 8), (16, 16)])
        res = runner.sweep(scen, "kl", tmp_path / name, checks="energy")
        margins = [row[4] for row in res.summary["rows"]]
        consts = [row[6] for row in res.summary["rows"]]
        same = bool(np.allclose(consts, consts[0], rtol=1e-12, atol=0))
        ok &= min(margins) >= 0 and same
        lines.append(f"{name}: min margin {min(margins):.3g}, C={consts[0]:.6g} same={same}")
    report(capsys, 4, ok, "; ".join(lines))


def test_criterion_5_constitutive(capsys):
    rng = np.random.default_rng(5)
    gaps = {}
    for p in (1.5, 2.0, 3.0):
        model = cm.NortonHoff(p)
        gaps[p] = cm.check_monotonicity(model, n=10_000, rng=rng).min_gap
    infs = {}
    for p in (2.0, 3.0):
        model = cm.NortonHoff(p)
        M = oz.PowerNFunction(oz.Exponent.constant(p))
        infs[p] = cm.check_coercivity(model, M, oz.complementary(M), n=10_000, rng=rng).sampled_inf
    ok = all(g >= -1e-12 for g in gaps.values()) and all(v >= 1.0 * (1 - cm.COERCIVITY_RTOL) for v in infs.values())
    report(capsys, 5, ok, f"monotonicity min gaps {gaps}; coercivity inf {infs} vs c = 1")


def test_criterion_6_orlicz_kernel(capsys, mesh8):
    leg = {}
    for p in (1.5, 2.0, 3.0, 4.0):
        prof = lambda r, p=p: np.abs(r) ** p / p
        eta = oz.conjugate_grid(prof, oz.DEFAULT_RADIAL_GRID)
        q = p / (p - 1)
        exact = eta ** q / q
        num = oz.legendre_radial(prof, eta)
        keep = exact > 0
        leg[p] = float(np.max(np.abs(num[keep] - exact[keep]) / exact[keep]))
    quad = mesh8.quadrature(2)
    A = np.diag([0.7, -0.2, -0.5])
    lux = {}
    for p in (1.5, 2.0, 3.0):
        M = oz.PowerNFunction(oz.Exponent.constant(p))
        val = oz.luxemburg_norm(M, np.broadcast_to(A, (len(quad.weights), 3, 3)), quad.points, quad.weights)
        exact = tensors.norm(A) * p ** (-1 / p)
        lux[p] = abs(val - exact) / exact
    rng = np.random.default_rng(6)
    M = oz.PowerNFunction(oz.Exponent.constant(2.5))
    xi = oz._random_sym(rng, 10_000) * np.exp(rng.uniform(-3, 3, 10_000))[:, None, None]
    eta = oz._random_sym(rng, 10_000) * np.exp(rng.uniform(-3, 3, 10_000))[:, None, None]
    gap = float(oz.fenchel_young_gap(M, oz.complementary(M), np.zeros((10_000, 2)), xi, eta).min())
    ok = max(leg.values()) <= 1e-6 and max(lux.values()) <= 1e-8 and gap >= -1e-10
    report(capsys, 6, ok, f"Legendre rel err max {max(leg.values()):.2e}; Luxemburg rel err max "
                          f"{max(lux.values()):.2e}; min Fenchel-Young gap {gap:.3e}")


def _heat_space_rates():
    errs = []
    T = 0.5
    for n in (8, 16, 32):
        m = fem.build_mesh(1.0, 1.0, n, n)
        x, y = m.nodes[:, 0], m.nodes[:, 1]
        nt = n * n // 4
        prob = rh.HeatProblem(m, np.linspace(0, T, nt + 1), None, np.cos(np.pi * x) * np.cos(np.pi * y))
        th = rh.solve_truncated(prob).theta[-1]
        e = th - np.exp(-2 * np.pi ** 2 * T) * np.cos(np.pi * x) * np.cos(np.pi * y)
        errs.append(np.sqrt(e @ fem.scalar_mass(m) @ e))
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


def _heat_time_rates():
    # self-convergence against a fine-step reference on a fixed mesh
    m = fem.build_mesh(1.0, 1.0, 32, 32)
    x, y = m.nodes[:, 0], m.nodes[:, 1]
    th0 = np.cos(np.pi * x) * np.cos(np.pi * y)
    # horizon short enough that mu_1 dt is small on the coarsest grid
    solve = lambda nt: rh.solve_truncated(rh.HeatProblem(m, np.linspace(0, 0.1, nt + 1), None, th0)).theta[-1]
    ref = solve(4096)
    M = fem.scalar_mass(m)
    errs = [np.sqrt((solve(nt) - ref) @ M @ (solve(nt) - ref)) for nt in (16, 32, 64)]
    return np.log2(np.array(errs[:-1]) / np.array(errs[1:]))


def test_criterion_7a_manufactured_heat(capsys):
    s, t = _heat_space_rates(), _heat_time_rates()
    ok = bool(np.all(np.abs(s - 2.0) <= 0.15 * 2.0) and np.all(np.abs(t - 1.0) <= 0.15))
    report(capsys, "7a", ok, f"space rates {np.round(s, 3)} (nominal 2); time rates {np.round(t, 3)} (nominal 1)")


def test_criterion_7b_truncation_tail(capsys, renorm_study):
    tails = renorm_study.summary["tails"]
    ok = tails[-1] <= 0.1 * tails[0] and all(b <= a for a, b in zip(tails[:-1], tails[1:]))
    report(capsys, "7b", ok, f"tails at K={renorm_study.summary['K_values']}: {np.round(tails, 5)}")


def test_criterion_7c_renorm_residual(capsys, renorm_study):
    res = renorm_study.summary["residuals"]
    ok = all(all(b < a for a, b in zip(v[:-1], v[1:])) for v in res.values())
    report(capsys, "7c", ok, "residual along eps " + "; ".join(f"M_S={k}: {np.round(v, 4)}" for k, v in res.items()))


def test_criterion_7d_comparison(capsys, renorm_study):
    rec = next(r for r in renorm_study.records if r.name == "comparison")
    report(capsys, "7d", rec.value >= -1e-8, f"min(theta_hi - theta_lo) = {rec.value:.3e} (>= -1e-8)")


def test_criterion_8_cauchy_l1(capsys, renorm_study):
    header, rows = io.read_csv(renorm_study.out_dir / "cauchy.csv")
    dist, bound = rows[:, 2], rows[:, 3]
    worst = float(np.max(dist - bound))
    report(capsys, 8, worst <= 1e-6, f"max(distance - bound) over {len(rows)} pairs: {worst:.3e} (<= 1e-6)")


def test_criterion_9_determinism(capsys, shipped, tmp_path):
    scen = shipped["smooth_p2"]
    a = runner.run_evolution(scen, tmp_path / "a", seed=7)
    b = runner.run_evolution(scen, tmp_path / "b", seed=7)
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    same &= a.summary["checks"] == b.summary["checks"]
    report(capsys, 9, bool(names) and same, f"byte-identical {names} and check records across two runs")


def test_criterion_10_refinement_indicator(capsys, shipped, tmp_path):
    scen = shipped["smooth_p2"].with_overrides(study__sweep_kl=[(4, 4), (8, 8), (16, 16), (32, 32)])
    res = runner.sweep(scen, "kl", tmp_path, checks="energy")
    ind = [row[3] for row in res.summary["rows"][1:]]
    ok = all(b < a for a, b in zip(ind[:-1], ind[1:]))
    report(capsys, 10, ok, f"|E(2k,2l) - E(k,l)| for k = 4, 8, 16: {np.round(ind, 5)}")
