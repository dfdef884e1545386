"""Energy bookkeeping and inequality audits over a computed trajectory.

Every function here is a pure function of a :class:`Trajectory` (plus the
static data it was computed with); nothing is cached between calls.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import mesh as fem
from . import tensors
from .errors import InputError


@dataclass(frozen=True)
class CheckRecord:
    """One audited property: ``margin >= 0`` means it holds."""

    name: str
    anchor: str
    value: float
    margin: float
    passed: bool

    def as_dict(self):
        return asdict(self)


def potential_energy(state, bases, direct=False) -> float:
    """``1/2 int D(eps(u) - eps_p) : (eps(u) - eps_p)``.

    By default evaluated as ``1/2 |delta|^2`` (valid because the complement
    modes are D-orthonormal); ``direct=True`` integrates the reconstructed
    fields instead.
    """
    if not direct:
        return 0.5 * float(state.delta @ state.delta)
    mesh = bases.mesh
    u = np.einsum("n,icn->ic", state.gamma, bases.W) if bases.k else np.zeros((mesh.n_nodes, 2))
    eps_p = (np.einsum("n,neij->eij", state.gamma, bases.eps_w)
             + np.einsum("m,meij->eij", state.delta, bases.zeta))
    elastic = fem.element_strain(mesh, u) - eps_p
    return 0.5 * float(bases.D.inner(elastic, elastic, mesh.areas))


def cumulative_trapezoid(values, times):
    values = np.asarray(values, dtype=float)
    out = np.zeros(len(times))
    if len(times) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(times) * (values[1:] + values[:-1]))
    return out


def lifting_modular(M, lift_elastic, mesh, scale, T_final, quad_order=4) -> float:
    """``int_Q M(x, scale * T~d)`` for the time-independent elastic lifting."""
    quad = mesh.quadrature(quad_order)
    vals = M(quad.points, scale * lift_elastic.stress_dev[quad.element])
    return float(T_final * (quad.weights @ vals))


@dataclass(frozen=True)
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray
    dissipation_integral: np.ndarray   # cumulative int int G~ : T
    modular_M: np.ndarray              # cumulative <M(T~d + Td)>
    modular_Mstar: np.ndarray          # cumulative <M*(G~)>
    lhs: np.ndarray
    rhs: float
    margin: np.ndarray
    c: float
    d: float
    lift_term: float
    uniform_constant: float
    uniform_margin: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margin >= 0))

    @property
    def uniform_passed(self) -> bool:
        return bool(np.all(self.uniform_margin >= 0))

    def monotone_accumulators(self) -> bool:
        tol = 1e-14 * (1.0 + np.abs(self.modular_M[-1]) + np.abs(self.modular_Mstar[-1]))
        return bool(np.all(np.diff(self.modular_M) >= -tol) and np.all(np.diff(self.modular_Mstar) >= -tol))


def energy_budget(trajectory, lift_elastic, mesh, M, Mstar, c, eps_p0_norm_sq=None) -> EnergyReport:
    """Energy inequality audit at every stored time.

    ``LHS(t) = E(t) + c <M(T~d+Td)>_0^t + ((2c-d)/2) <M*(G~)>_0^t`` against
    ``RHS = int_Q M(x, (2/d) T~d) + E(0)`` with ``d = min(1, c)``.  When the
    D-norm square of the unprojected initial strain is supplied, the
    basis-independent constant ``int_Q M(x,(2/d)T~d) + |eps_p0|_D^2 / 2`` is
    audited as well (it dominates ``E(0)`` for every basis size).
    """
    diag = trajectory.diagnostics
    for name in ("energy", "dissipation", "modular_M", "modular_Mstar"):
        if name not in diag or not np.all(np.isfinite(diag[name])):
            raise InputError(f"trajectory lacks the diagnostic {name!r}")
    if c is None or not c > 0:
        raise InputError(f"energy budget needs a positive coercivity constant, got {c}")
    t = trajectory.times
    d = min(1.0, c)
    E = diag["energy"]
    cum_M = cumulative_trapezoid(diag["modular_M"], t)
    cum_Ms = cumulative_trapezoid(diag["modular_Mstar"], t)
    lift = lifting_modular(M, lift_elastic, mesh, 2.0 / d, t[-1] - t[0])
    lhs = E + c * cum_M + 0.5 * (2.0 * c - d) * cum_Ms
    rhs = lift + E[0]
    uniform = lift + 0.5 * (eps_p0_norm_sq if eps_p0_norm_sq is not None else 2.0 * E[0])
    return EnergyReport(t, E, cumulative_trapezoid(diag["dissipation"], t), cum_M, cum_Ms,
                        lhs, float(rhs), rhs - lhs, float(c), d, lift, float(uniform), uniform - lhs)


def energy_identity_residual(trajectory) -> np.ndarray:
    """Cumulative ``E(t) - E(0) + int_0^t int G~ : T`` (trapezoid in time)."""
    diag = trajectory.diagnostics
    E = diag["energy"]
    return E - E[0] + cumulative_trapezoid(diag["dissipation"], trajectory.times)


def psi_weight(s, mu, tau):
    """Cut-off equal to 1 before ``tau``, linear down to 0 on
    ``[tau, tau + mu]`` and 0 afterwards."""
    s = np.asarray(s, dtype=float)
    return np.clip(1.0 - (s - tau) / mu, 0.0, 1.0)


@dataclass(frozen=True)
class PsiProbe:
    lhs: float           # int_0^T psi int G~ : T
    average: float       # (1/mu) int_tau^{tau+mu} E
    energy0: float
    defect: float        # |lhs - (E(0) - average)|


def psi_probe(trajectory, mu, tau) -> PsiProbe:
    """Weighted dissipation against the windowed energy average.

    The kinks of the weight are inserted into the time grid (data linearly
    interpolated) before trapezoid integration.
    """
    t = trajectory.times
    if not mu > 0 or tau < t[0]:
        raise InputError(f"need mu > 0 and tau >= {t[0]}, got mu={mu}, tau={tau}")
    if tau + mu > t[-1] + 1e-12 * max(1.0, abs(t[-1])):
        raise InputError(f"tau + mu = {tau + mu} exceeds the final time {t[-1]}")
    grid = np.union1d(t, [tau, min(tau + mu, t[-1])])
    E = np.interp(grid, t, trajectory.diagnostics["energy"])
    dis = np.interp(grid, t, trajectory.diagnostics["dissipation"])
    lhs = float(np.trapezoid(psi_weight(grid, mu, tau) * dis, grid))
    window = (grid >= tau) & (grid <= tau + mu)
    avg = float(np.trapezoid(E[window], grid[window]) / mu)
    E0 = float(E[0])
    return PsiProbe(lhs, avg, E0, abs(lhs - (E0 - avg)))


@dataclass(frozen=True)
class OrliczAudit:
    modular_M: float              # space-time <M(T~d + Td)>
    modular_Mstar: float          # space-time <M*(G~)>
    product_l1: float             # space-time int |G~ : (T~d + Td)|
    fenchel_young_margin: np.ndarray   # per step: <M> + <M*> - int |G~:(T~d+Td)|
    quadratic_margin: np.ndarray       # per step: int |G~|^2 - <M*(G~)>
    fenchel_young_passed: bool
    quadratic_passed: bool


def audit_orlicz(trajectory) -> OrliczAudit:
    diag = trajectory.diagnostics
    t = trajectory.times
    mM, mMs, prod, gsq = (diag[n] for n in ("modular_M", "modular_Mstar", "product_l1", "G_sq"))
    if not (np.all(np.isfinite(mM)) and np.all(np.isfinite(mMs))):
        raise InputError("trajectory was computed without an N-function pair")
    fy = mM + mMs - prod
    quad = gsq - mMs
    tol = 1e-12 * (1.0 + mM + mMs)

    def total(v):
        return float(np.trapezoid(v, t)) if len(t) > 1 else 0.0

    return OrliczAudit(total(mM), total(mMs), total(prod), fy, quad,
                       bool(np.all(fy >= -tol)), bool(np.all(quad >= -1e-12 * (1.0 + gsq))))


def dissipation_check(trajectory) -> CheckRecord:
    w = trajectory.diagnostics["work"]
    m = float(w.min())
    return CheckRecord("dissipation_positivity", "flow-law coercivity", m, m + 1e-10, m >= -1e-10)


def equilibrium_check(trajectory) -> CheckRecord:
    diag = trajectory.diagnostics
    bound = 1e-10 * (1.0 + diag["stress_l2"])
    worst = float(np.max(diag["equilibrium"] - bound))
    return CheckRecord("discrete_equilibrium", "stress orthogonal to displacement-mode strains",
                       float(diag["equilibrium"].max()), -worst, worst <= 0)


def temperature_l1_bound(trajectory) -> CheckRecord:
    v = float(np.max(trajectory.diagnostics["theta_l1"]))
    return CheckRecord("temperature_l1_sup", "temperature bounded in L-infinity(L1)", v, 0.0, bool(np.isfinite(v)))


def standard_checks(trajectory, report: EnergyReport | None = None, identity_tol=None) -> list:
    """Checks run after every evolution: equilibrium, dissipation sign,
    temperature bound, and (when a report is given) the energy budget and
    the accumulator monotonicity."""
    out = [equilibrium_check(trajectory), dissipation_check(trajectory), temperature_l1_bound(trajectory)]
    res = energy_identity_residual(trajectory)
    worst = float(np.abs(res).max())
    tol = identity_tol if identity_tol is not None else 1e-4
    out.append(CheckRecord("energy_identity", "energy rate equals minus dissipation", worst,
                           tol - worst, worst <= tol))
    if report is not None:
        m = float(report.margin.min())
        out.append(CheckRecord("energy_inequality", "energy budget with lifting modular", m, m, m >= 0))
        mu = float(report.uniform_margin.min())
        out.append(CheckRecord("energy_inequality_uniform", "basis-independent energy budget", mu, mu, mu >= 0))
        out.append(CheckRecord("accumulators_monotone", "modular accumulators nondecreasing",
                               0.0, 0.0, report.monotone_accumulators()))
        e_min = float(report.energy.min())
        out.append(CheckRecord("energy_nonnegative", "potential energy nonnegative", e_min, e_min, e_min >= 0))
    return out
