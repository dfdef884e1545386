"""Two-level Galerkin system for the coefficients ``(gamma, delta, beta)``.

With ``u = sum gamma_n w_n``, ``eps_p = sum gamma_n eps(w_n) + sum delta_m
zeta_m`` and ``theta = sum beta_m v_m`` the stress is ``T = -D sum delta_m
zeta_m`` and the coefficients obey

    gamma_n' = (1/lambda_n) int G~ : D eps(w_n)
    delta_m' = int G~ : D zeta_m
    beta_m'  = int T_K((T~d + Td) : G~) v_m - mu_m beta_m

where ``G~ = G(theta~ + theta, T~d + Td)`` is evaluated at element Gauss
points and ``T_K`` clamps to ``[-K, K]``.  Time stepping is second-order
exponential Runge-Kutta (Cox-Matthews ETD2RK): exact on the linear decay of
``beta``, Heun on the remaining terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import mesh as fem
from . import tensors
from .discretization import project_scalar, project_strain
from .errors import InputError, NumericError
from .lifting import LiftingElastic, LiftingHeat

SUBSTEP_THRESHOLD = 0.2
MAX_SUBSTEP_DEPTH = 12
DIAGNOSTIC_FIELDS = (
    "energy", "dissipation", "work", "product_l1", "modular_M", "modular_Mstar",
    "G_sq", "source", "theta_l1", "theta_total_l1", "equilibrium", "stress_l2",
)


@dataclass(frozen=True)
class State:
    t: float
    gamma: np.ndarray
    delta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("gamma", "delta", "beta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"state component {name} has non-finite entries at t={self.t}")

    @property
    def alpha(self):
        """Displacement coefficients; identical to ``gamma`` by construction."""
        return self.gamma

    def vector(self):
        return np.concatenate([self.gamma, self.delta, self.beta])

    @classmethod
    def from_vector(cls, t, y, k, l):
        return cls(float(t), y[:k].copy(), y[k:k + l].copy(), y[k + l:].copy())


@dataclass(frozen=True)
class TruncationSpec:
    K: float

    def __post_init__(self):
        if not (np.isfinite(self.K) and self.K > 0):
            raise InputError(f"truncation level K must be finite and positive, got {self.K}")


def truncate(values, K):
    if not K > 0:
        raise InputError(f"truncation level must be positive, got {K}")
    return np.clip(values, -K, K)


@dataclass
class EvolutionProblem:
    """Everything the right-hand side needs besides the state."""

    bases: object
    model: object
    truncation: TruncationSpec
    lift_elastic: LiftingElastic | None = None
    lift_heat: LiftingHeat | None = None
    M: object = None
    Mstar: object = None
    quad_order: int = 4
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        mesh = self.bases.mesh
        if self.lift_elastic is None:
            self.lift_elastic = LiftingElastic.zero(mesh)
        quad = mesh.quadrature(self.quad_order)
        interp = fem.interpolation_matrix(mesh, quad)
        self._cache.update(
            quad=quad, interp=interp, V_q=interp @ self.bases.V,
            lift_dev_q=self.lift_elastic.stress_dev[quad.element],
        )

    @property
    def quad(self):
        return self._cache["quad"]

    def lifted_theta(self, t):
        if self.lift_heat is None:
            return np.zeros(self.bases.mesh.n_nodes)
        return self.lift_heat.at(t)


@dataclass
class _Fields:
    stress: np.ndarray        # (E,3,3) T
    td_q: np.ndarray          # (nq,3,3) T~d + Td at Gauss points
    theta_q: np.ndarray       # (nq,) theta at Gauss points (without lifting)
    G_q: np.ndarray           # (nq,3,3)
    G_bar: np.ndarray         # (E,3,3) element integrals of G~
    source_q: np.ndarray      # (nq,) truncated heat source


def _evaluate(problem: EvolutionProblem, t, gamma, delta, beta) -> _Fields:
    b = problem.bases
    quad = problem.quad
    stress = -np.einsum("m,meij->eij", delta, b.D_zeta)
    td_q = problem._cache["lift_dev_q"] + tensors.dev(stress)[quad.element]
    theta_q = problem._cache["V_q"] @ beta
    total_q = theta_q + problem._cache["interp"] @ problem.lifted_theta(t)
    G_q = problem.model(total_q, td_q, quad.points)
    if not np.all(np.isfinite(G_q)):
        bad = int(np.argwhere(~np.all(np.isfinite(G_q), axis=(1, 2)))[0, 0])
        raise NumericError(f"non-finite flow-law value at t={t:.6g}, element {int(quad.element[bad])}, "
                           f"point ({quad.points[bad, 0]:.6g}, {quad.points[bad, 1]:.6g})")
    G_bar = quad.element_sum(quad.weights[:, None, None] * G_q)
    source_q = truncate(tensors.ddot(td_q, G_q), problem.truncation.K)
    return _Fields(stress, td_q, theta_q, G_q, G_bar, source_q)


def _derivative(problem, fields, beta):
    b = problem.bases
    gdot = np.einsum("eij,neij->n", fields.G_bar, b.D_eps_w) / b.lam
    ddot_ = np.einsum("eij,meij->m", fields.G_bar, b.D_zeta)
    bdot = problem._cache["V_q"].T @ (problem.quad.weights * fields.source_q) - b.mu * beta
    return gdot, ddot_, bdot


def rhs(state: State, problem: EvolutionProblem):
    """Time derivative ``(gamma', delta', beta')`` at ``state``."""
    f = _evaluate(problem, state.t, state.gamma, state.delta, state.beta)
    return _derivative(problem, f, state.beta)


def _diagnostics(problem, fields, state) -> dict:
    b, quad = problem.bases, problem.quad
    w = quad.weights
    mesh = b.mesh
    areas = mesh.areas
    td_work = tensors.ddot(fields.G_q, fields.td_q)
    theta_lift_q = problem._cache["interp"] @ problem.lifted_theta(state.t)
    eq = np.einsum("e,eij,neij->n", areas, fields.stress, b.eps_w)
    out = {
        "energy": 0.5 * float(state.delta @ state.delta),
        "dissipation": float(np.einsum("eij,eij->", fields.G_bar, fields.stress)),
        "work": float(w @ td_work),
        "product_l1": float(w @ np.abs(td_work)),
        "G_sq": float(w @ tensors.ddot(fields.G_q, fields.G_q)),
        "source": float(w @ fields.source_q),
        "theta_l1": float(w @ np.abs(fields.theta_q)),
        "theta_total_l1": float(w @ np.abs(fields.theta_q + theta_lift_q)),
        "equilibrium": float(np.abs(eq).max()) if len(eq) else 0.0,
        "stress_l2": float(np.sqrt(max(np.einsum("e,eij,eij->", areas, fields.stress, fields.stress), 0.0))),
        "modular_M": float("nan"),
        "modular_Mstar": float("nan"),
    }
    if problem.M is not None:
        out["modular_M"] = float(w @ problem.M(quad.points, fields.td_q))
    if problem.Mstar is not None:
        out["modular_Mstar"] = float(w @ problem.Mstar(quad.points, fields.G_q))
    return out


# -- exponential Runge-Kutta -------------------------------------------------

def _phi_functions(z):
    """``phi1 = (e^z - 1)/z`` and ``phi2 = (e^z - 1 - z)/z^2`` elementwise,
    with a Taylor branch near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    zs = np.where(small, z, 0.0)
    zl = np.where(small, 1.0, z)
    ser1 = sum(zs ** j / factorial(j + 1) for j in range(12))
    ser2 = sum(zs ** j / factorial(j + 2) for j in range(12))
    em1 = np.expm1(zl)
    phi1 = np.where(small, ser1, em1 / zl)
    phi2 = np.where(small, ser2, (em1 - zl) / zl ** 2)
    return phi1, phi2


def _l2_tensor(quad, G):
    return float(np.sqrt(max(quad.weights @ tensors.ddot(G, G), 0.0)))


class _Stepper:
    def __init__(self, problem: EvolutionProblem):
        self.p = problem
        b = problem.bases
        self.k, self.l = b.k, b.l
        self.lin = np.concatenate([np.zeros(self.k + self.l), -b.mu])
        self._phi = {}
        self.substeps = 0

    def split(self, y):
        k, l = self.k, self.l
        return y[:k], y[k:k + l], y[k + l:]

    def evaluate(self, t, y):
        g, d, be = self.split(y)
        f = _evaluate(self.p, t, g, d, be)
        N = np.concatenate(_derivative(self.p, f, be)) - self.lin * y
        return f, N

    def factors(self, h):
        key = float(h)
        hit = self._phi.get(key)
        if hit is None:
            z = self.lin * h
            p1, p2 = _phi_functions(z)
            hit = (np.exp(z), h * p1, h * p2)
            self._phi[key] = hit
        return hit

    def advance(self, t, y, h, f_y, N_y, depth=0):
        ez, hp1, hp2 = self.factors(h)
        a = ez * y + hp1 * N_y
        ok = np.all(np.isfinite(a))
        if ok:
            try:
                f_a, N_a = self.evaluate(t + h, a)
                ok = np.all(np.isfinite(N_a))
            except NumericError:
                ok = False
        if ok:
            ref = _l2_tensor(self.p.quad, f_y.G_q)
            change = _l2_tensor(self.p.quad, f_a.G_q - f_y.G_q)
            if change <= SUBSTEP_THRESHOLD * ref or depth >= MAX_SUBSTEP_DEPTH:
                return a + hp2 * (N_a - N_y)
        elif depth >= MAX_SUBSTEP_DEPTH:
            raise NumericError(f"sub-stepping exhausted at t={t:.6g} (non-finite stage)")
        self.substeps += 1
        half = 0.5 * h
        y1 = self.advance(t, y, half, f_y, N_y, depth + 1)
        f1, N1 = self.evaluate(t + half, y1)
        return self.advance(t + half, y1, half, f1, N1, depth + 1)


def step(state: State, dt: float, problem: EvolutionProblem) -> State:
    """One ETD2RK step of size ``dt`` with adaptive halving."""
    if not dt > 0:
        raise InputError(f"time step must be positive, got {dt}")
    st = _Stepper(problem)
    y = state.vector()
    f_y, N_y = st.evaluate(state.t, y)
    y1 = st.advance(state.t, y, dt, f_y, N_y)
    return State.from_vector(state.t + dt, y1, st.k, st.l)


# -- trajectories ------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    gamma: np.ndarray          # (n_t, k)
    delta: np.ndarray          # (n_t, l)
    beta: np.ndarray           # (n_t, l)
    diagnostics: dict          # name -> (n_t,) array
    substeps: int = 0

    def __post_init__(self):
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        for name, arr in self.diagnostics.items():
            if len(arr) != len(self.times):
                raise InputError(f"diagnostic {name} missing for some stored steps")

    def __len__(self):
        return len(self.times)

    def state(self, i) -> State:
        return State(float(self.times[i]), self.gamma[i], self.delta[i], self.beta[i])

    def states(self):
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)


def _assemble_trajectory(times, ys, diags, k, l, substeps):
    Y = np.array(ys)
    d = {name: np.array([dg[name] for dg in diags]) for name in DIAGNOSTIC_FIELDS}
    return Trajectory(np.array(times[:len(ys)]), Y[:, :k], Y[:, k:k + l], Y[:, k + l:], d, substeps)


def time_grid(dt, T_final):
    if T_final < 0:
        raise InputError(f"final time must be non-negative, got {T_final}")
    if T_final == 0:
        return np.array([0.0])
    if not dt > 0:
        raise InputError(f"time step must be positive, got {dt}")
    n = int(np.ceil(T_final / dt - 1e-9))
    return np.linspace(0.0, T_final, n + 1)


def integrate(problem: EvolutionProblem, state0: State, times) -> Trajectory:
    """Advance ``state0`` across the grid ``times`` (``times[0] = state0.t``),
    recording diagnostics at every grid time.  On a numerical failure a
    :class:`NumericError` is raised carrying the partial trajectory."""
    times = np.asarray(times, dtype=float)
    st = _Stepper(problem)
    y = state0.vector()
    ys, diags = [y], []
    try:
        f_y, N_y = st.evaluate(times[0], y)
        for i in range(len(times) - 1):
            diags.append(_diagnostics(problem, f_y, State.from_vector(times[i], y, st.k, st.l)))
            y = st.advance(times[i], y, times[i + 1] - times[i], f_y, N_y)
            if not np.all(np.isfinite(y)):
                raise NumericError(f"non-finite state after step to t={times[i + 1]:.6g}")
            ys.append(y)
            f_y, N_y = st.evaluate(times[i + 1], y)
        diags.append(_diagnostics(problem, f_y, State.from_vector(times[-1], y, st.k, st.l)))
    except NumericError as exc:
        n = len(diags)
        partial = _assemble_trajectory(times, ys[:n], diags, st.k, st.l, st.substeps) if n else None
        raise NumericError(str(exc), partial=partial, residual=getattr(exc, "residual", None)) from exc
    return _assemble_trajectory(times, ys, diags, st.k, st.l, st.substeps)


def initial_state(theta0, eps_p0, bases, K) -> State:
    """Projection of the truncated initial temperature and of the initial
    visco-elastic strain (element-wise, traceless)."""
    N, E = bases.mesh.n_nodes, bases.mesh.n_elements
    theta0 = np.zeros(N) if theta0 is None else np.broadcast_to(np.asarray(theta0, dtype=float), (N,))
    eps_p0 = np.zeros((E, 3, 3)) if eps_p0 is None else np.asarray(eps_p0, dtype=float)
    tr = np.abs(tensors.trace(eps_p0))
    if np.any(tr > 1e-10 * np.maximum(tensors.norm(eps_p0), np.finfo(float).tiny)):
        raise InputError("initial visco-elastic strain must be traceless")
    beta = project_scalar(truncate(theta0, K), bases)
    gamma, delta = project_strain(eps_p0, bases)
    return State(0.0, gamma, delta, beta)


@dataclass(frozen=True)
class Reconstruction:
    u: np.ndarray            # (N, 2)
    eps_p: np.ndarray        # (E, 3, 3)
    theta: np.ndarray        # (N,)
    stress: np.ndarray       # (E, 3, 3)
    stress_dev: np.ndarray   # (E, 3, 3)


def reconstruct(state: State, bases, lift_elastic=None, lift_heat=None, total=False) -> Reconstruction:
    """Physical fields of a state; with ``total=True`` the lifting fields
    are added (``u~ + u``, ``T~ + T``, ``theta~ + theta``)."""
    if len(state.gamma) != bases.k or len(state.delta) != bases.l or len(state.beta) != bases.l:
        raise InputError("state dimensions do not match the bases")
    u = np.einsum("n,icn->ic", state.gamma, bases.W) if bases.k else np.zeros((bases.mesh.n_nodes, 2))
    eps_p = (np.einsum("n,neij->eij", state.gamma, bases.eps_w)
             + np.einsum("m,meij->eij", state.delta, bases.zeta))
    stress = -np.einsum("m,meij->eij", state.delta, bases.D_zeta)
    theta = bases.V @ state.beta
    if total:
        if lift_elastic is not None:
            u = u + lift_elastic.u
            stress = stress + lift_elastic.stress
        if lift_heat is not None:
            theta = theta + lift_heat.at(state.t)
    return Reconstruction(u, eps_p, theta, stress, tensors.dev(stress))
