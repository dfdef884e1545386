"""Heat equation with L1 data: truncated-data approximations and
renormalized-solution diagnostics.

The solver is P1 in space with a lumped mass matrix and implicit Euler in
time.  On non-obtuse triangulations ``M_L + dt K`` is an M-matrix whose
column sums equal the lumped masses, which makes the scheme exactly
mass-conserving, order-preserving and L1-contractive in the lumped norm
``sum_i m_i |theta_i|``.  The discrete bounds below are stated in that norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla
from scipy.interpolate import CubicHermiteSpline

from . import mesh as fem
from .errors import InputError, NumericError


def truncate(field, K):
    """Pointwise clamp to ``[-K, K]``."""
    if not K > 0:
        raise InputError(f"truncation level must be positive, got {K}")
    return np.clip(field, -K, K)


def tilde_T(r, K):
    """Primitive of the truncation: ``r^2/2`` for ``|r| <= K`` and
    ``K^2/2 + K(|r| - K)`` beyond (even in ``r``)."""
    if not K > 0:
        raise InputError(f"truncation level must be positive, got {K}")
    a = np.abs(np.asarray(r, dtype=float))
    return np.where(a <= K, 0.5 * a * a, 0.5 * K * K + K * (a - K))


# -- problems and solutions --------------------------------------------------

@dataclass
class HeatProblem:
    """``theta_t - Laplace theta = f`` with zero Neumann flux.

    ``source(x, y, t)`` is vectorised and evaluated at the element Gauss
    points; ``theta0`` holds nodal initial values.
    """

    mesh: object
    times: np.ndarray
    source: Callable | None
    theta0: np.ndarray
    quad_order: int = 4
    label: str = ""
    _loads: list = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise InputError("heat problem needs a strictly increasing time grid with at least two points")
        self.theta0 = np.broadcast_to(np.asarray(self.theta0, dtype=float), (self.mesh.n_nodes,)).copy()
        if not np.all(np.isfinite(self.theta0)):
            raise InputError("initial temperature must be finite (use a truncated approximation)")

    @property
    def quad(self):
        return self.mesh.quadrature(self.quad_order)

    def source_values(self, i):
        """Source at the Gauss points at ``times[i]``."""
        q = self.quad
        if self.source is None:
            return np.zeros(len(q.weights))
        vals = np.broadcast_to(np.asarray(self.source(q.points[:, 0], q.points[:, 1], self.times[i]),
                                          dtype=float), (len(q.weights),))
        if not np.all(np.isfinite(vals)):
            raise InputError("heat source must be finite at the Gauss points (use a truncated approximation)")
        return vals

    def source_l1(self) -> float:
        """``int_Q |f|`` with the scheme's own rule (right endpoint in time)."""
        q = self.quad
        dts = np.diff(self.times)
        return float(sum(dts[i - 1] * (q.weights @ np.abs(self.source_values(i)))
                         for i in range(1, len(self.times))))


@dataclass(frozen=True)
class HeatSolution:
    problem: HeatProblem
    theta: np.ndarray         # (n_t, N)

    @property
    def times(self):
        return self.problem.times

    @property
    def mesh(self):
        return self.problem.mesh


def lumped_masses(mesh):
    return fem.scalar_mass(mesh, lumped=True).diagonal()


def l1_lumped(mesh, nodal):
    return float(lumped_masses(mesh) @ np.abs(nodal))


def solve_truncated(problem: HeatProblem) -> HeatSolution:
    """Implicit-Euler lumped-mass P1 solution."""
    mesh = problem.mesh
    m = lumped_masses(mesh)
    K = fem.scalar_stiffness(mesh)
    quad = problem.quad
    theta = np.empty((len(problem.times), mesh.n_nodes))
    theta[0] = problem.theta0
    factors = {}
    for i in range(1, len(problem.times)):
        dt = problem.times[i] - problem.times[i - 1]
        key = round(dt, 15)
        if key not in factors:
            factors[key] = spla.splu((fem.scalar_mass(mesh, lumped=True) + dt * K).tocsc())
        b = fem.load_vector(mesh, quad, problem.source_values(i))
        theta[i] = factors[key].solve(m * theta[i - 1] + dt * b)
    if not np.all(np.isfinite(theta)):
        raise NumericError("heat solve produced non-finite values")
    return HeatSolution(problem, theta)


# -- truncation diagnostics --------------------------------------------------

def truncation_tail(solution: HeatSolution, K, c) -> float:
    """``|T_{K+c} theta - T_K theta|`` in ``L2(0,T; W^{1,2})`` using nodal
    clamps and the right-endpoint rule in time."""
    if not c > 0:
        raise InputError(f"tail width must be positive, got {c}")
    mesh = solution.mesh
    A = fem.scalar_mass(mesh) + fem.scalar_stiffness(mesh)
    z = truncate(solution.theta[1:], K + c) - truncate(solution.theta[1:], K)
    dts = np.diff(solution.times)
    return float(np.sqrt(max(np.sum(dts * np.einsum("tn,tn->t", z, (A @ z.T).T)), 0.0)))


@dataclass(frozen=True)
class TruncationEnergy:
    lhs: np.ndarray       # per time: sum m T~_K(theta) + int_0^t |grad T_K theta|^2
    bound: float          # K (|f|_L1 + |theta0|_L1)
    l2_sq: np.ndarray     # per time: |T_K theta|^2 (lumped)
    tilde_int: np.ndarray  # per time: int T~_K(theta) (lumped)

    @property
    def passed(self) -> bool:
        tol = 1e-10 * (1.0 + self.bound)
        return bool(np.all(self.lhs <= self.bound + tol) and np.all(self.l2_sq <= 2 * self.tilde_int + tol))


def truncation_energy(solution: HeatSolution, K) -> TruncationEnergy:
    mesh = solution.mesh
    m = lumped_masses(mesh)
    Kst = fem.scalar_stiffness(mesh)
    tk = truncate(solution.theta, K)
    tilde = tilde_T(solution.theta, K) @ m
    grad = np.einsum("tn,tn->t", tk, (Kst @ tk.T).T)
    dts = np.concatenate([[0.0], np.diff(solution.times)])
    lhs = tilde + np.cumsum(dts * grad)
    bound = K * (solution.problem.source_l1() + l1_lumped(mesh, solution.problem.theta0))
    return TruncationEnergy(lhs, float(bound), (tk ** 2) @ m, tilde)


# -- renormalization ---------------------------------------------------------

def _h(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)


def _h_prime(z):
    z = np.asarray(z, dtype=float)
    zs = np.where(z > 0, z, 1.0)
    return np.where(z > 0, _h(z) / zs ** 2, 0.0)


def cutoff(u):
    """Smooth non-increasing cut-off: 1 on ``[0, 1/2]``, 0 on ``[1, inf)``."""
    u = np.asarray(u, dtype=float)
    a, b = _h(1.0 - u), _h(u - 0.5)
    return a / (a + b)


def cutoff_prime(u):
    u = np.asarray(u, dtype=float)
    a, b = _h(1.0 - u), _h(u - 0.5)
    da, db = -_h_prime(1.0 - u), _h_prime(u - 0.5)
    return (da * b - a * db) / (a + b) ** 2


class SmoothClamp:
    """Odd renormalization ``S`` with ``S' = cutoff(|r|/M)``: the identity
    near 0, constant beyond ``M``; ``supp S'`` is ``[-M, M]``."""

    def __init__(self, M: float, nodes: int = 4097):
        if not M > 0:
            raise InputError(f"clamp level must be positive, got {M}")
        self.M = float(M)
        r = np.linspace(0.0, self.M, nodes)
        d = cutoff(r / self.M)
        # trapezoid with an endpoint derivative correction (fourth order)
        h = r[1] - r[0]
        dd = cutoff_prime(r / self.M) / self.M
        steps = 0.5 * h * (d[1:] + d[:-1]) + h * h / 12.0 * (dd[:-1] - dd[1:])
        vals = np.concatenate([[0.0], np.cumsum(steps)])
        self._spline = CubicHermiteSpline(r, vals, d)
        self.plateau = float(vals[-1])

    @property
    def support(self):
        return (-self.M, self.M)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        a = np.minimum(np.abs(r), self.M)
        return np.sign(r) * self._spline(a)

    def prime(self, r):
        return cutoff(np.abs(np.asarray(r, dtype=float)) / self.M)

    def second(self, r):
        r = np.asarray(r, dtype=float)
        return np.sign(r) * cutoff_prime(np.abs(r) / self.M) / self.M

    def __repr__(self):
        return f"SmoothClamp(M={self.M:g})"


class ConstantS:
    """``S = value``; its derivative vanishes (support bound 0)."""

    M = 0.0

    def __init__(self, value=1.0):
        self.value = float(value)

    @property
    def support(self):
        return (0.0, 0.0)

    def __call__(self, r):
        return np.full(np.shape(r), self.value)

    def prime(self, r):
        return np.zeros(np.shape(r))

    def second(self, r):
        return np.zeros(np.shape(r))

    def __repr__(self):
        return f"ConstantS({self.value:g})"


def builtin_family(levels=(1.0, 2.0, 4.0)):
    return [SmoothClamp(M) for M in levels]


@dataclass(frozen=True)
class TestFunction:
    """``phi(x, y, t) = time_factor(t) * space_factor(x, y)``."""

    space: Callable
    time: Callable
    name: str

    def __call__(self, x, y, t):
        return self.time(t) * np.asarray(self.space(x, y), dtype=float)


def builtin_test_functions(T, Lx=1.0, Ly=1.0):
    """Products of low-degree polynomials with ``cos^2(pi t / (2T))``."""
    tf = lambda t: np.cos(0.5 * np.pi * np.asarray(t, dtype=float) / T) ** 2
    spaces = [
        (lambda x, y: np.ones_like(x), "1"),
        (lambda x, y: x / Lx, "x"),
        (lambda x, y: (x / Lx) * (1 - x / Lx) * (y / Ly), "x(1-x)y"),
    ]
    return [TestFunction(s, tf, f"{name}*cos^2") for s, name in spaces]


def renorm_residual(solution: HeatSolution, S, phi, source=None, theta0=None) -> float:
    """Discrete residual of the renormalized identity for ``(S, phi)``.

    Summation by parts in time against the implicit-Euler grid::

        - sum_n int S(theta^n)(phi^{n+1} - phi^n) - int S(theta_0) phi^0
        + sum_n dt_n int [S'(theta^n) grad T theta^n . grad phi^n
                          + S''(theta^n) |grad T theta^n|^2 phi^n
                          - f S'(theta^n) phi^n]

    where ``T`` clamps at the support bound of ``S'`` (nodal clamp).  The
    data ``source(x, y, t)`` and ``theta0(x, y)`` default to the ones of the
    solved problem; passing the untruncated target data measures how far a
    truncated-data solution is from solving the target problem.
    """
    prob = solution.problem
    mesh, quad, t = prob.mesh, prob.quad, prob.times
    x, y = quad.points[:, 0], quad.points[:, 1]
    phi_T = np.asarray(phi(x, y, t[-1]), dtype=float)
    scale = max(np.abs(np.asarray(phi(x, y, t[0]), dtype=float)).max(), 1.0)
    if np.abs(phi_T).max() > 1e-12 * scale:
        raise InputError("test function must vanish at the final time")
    interp = fem.interpolation_matrix(mesh, quad)
    w = quad.weights
    M_S = S.support[1]
    theta_q = (interp @ solution.theta.T).T                            # (n_t, nq)
    phis = np.array([np.broadcast_to(np.asarray(phi(x, y, tn), dtype=float), x.shape) for tn in t])
    # grad phi at Gauss points by central differences
    eps = 1e-6 * max(mesh.Lx, mesh.Ly)
    res = -np.sum((S(theta_q[:-1]) * (phis[1:] - phis[:-1])) @ w)
    if theta0 is None:
        s0 = S(theta_q[0])
    else:
        s0 = S(np.asarray(theta0(x, y), dtype=float))
    res -= float(s0 @ (w * phis[0]))
    for n in range(1, len(t)):
        dt = t[n] - t[n - 1]
        th = theta_q[n]
        if M_S > 0:
            tk = truncate(solution.theta[n], M_S)
            g = fem.element_gradient(mesh, tk)[quad.element]            # (nq, 2)
        else:
            g = np.zeros((len(w), 2))
        gphi = np.column_stack([
            (np.asarray(phi(x + eps, y, t[n])) - np.asarray(phi(x - eps, y, t[n]))) / (2 * eps),
            (np.asarray(phi(x, y + eps, t[n])) - np.asarray(phi(x, y - eps, t[n]))) / (2 * eps),
        ])
        if source is None:
            f = prob.source_values(n)
        else:
            f = np.broadcast_to(np.asarray(source(x, y, t[n]), dtype=float), x.shape)
        integrand = (S.prime(th) * np.sum(g * gphi, axis=1) + S.second(th) * np.sum(g * g, axis=1) * phis[n]
                     - f * S.prime(th) * phis[n])
        res += dt * float(w @ integrand)
    return float(res)


# -- comparison and Cauchy bounds -------------------------------------------

def comparison(problem_lo: HeatProblem, problem_hi: HeatProblem, sol_lo=None, sol_hi=None) -> float:
    """``min(theta_hi - theta_lo)`` over nodes and times for ordered data."""
    if problem_lo.mesh is not problem_hi.mesh or not np.array_equal(problem_lo.times, problem_hi.times):
        raise InputError("comparison needs both problems on the same mesh and time grid")
    if np.any(problem_lo.theta0 > problem_hi.theta0):
        raise InputError("comparison precondition violated: initial data not ordered")
    for i in range(1, len(problem_lo.times)):
        if np.any(problem_lo.source_values(i) > problem_hi.source_values(i)):
            raise InputError(f"comparison precondition violated: sources not ordered at t={problem_lo.times[i]:g}")
    sol_lo = solve_truncated(problem_lo) if sol_lo is None else sol_lo
    sol_hi = solve_truncated(problem_hi) if sol_hi is None else sol_hi
    return float(np.min(sol_hi.theta - sol_lo.theta))


@dataclass(frozen=True)
class CauchyRecord:
    eps_a: float
    eps_b: float
    distance: float      # max_t |theta_a - theta_b|_L1
    bound: float         # int_Q |f_a - f_b| + |theta0_a - theta0_b|_L1

    @property
    def passed(self) -> bool:
        return self.distance <= self.bound + 1e-6


def cauchy_pair(sol_a: HeatSolution, sol_b: HeatSolution, eps_a=np.nan, eps_b=np.nan) -> CauchyRecord:
    pa, pb = sol_a.problem, sol_b.problem
    mesh = pa.mesh
    m = lumped_masses(mesh)
    dist = float(np.max(np.abs(sol_a.theta - sol_b.theta) @ m))
    q = pa.quad
    dts = np.diff(pa.times)
    src = sum(dts[i - 1] * (q.weights @ np.abs(pa.source_values(i) - pb.source_values(i)))
              for i in range(1, len(pa.times)))
    bound = float(src + m @ np.abs(pa.theta0 - pb.theta0))
    return CauchyRecord(float(eps_a), float(eps_b), dist, bound)


# -- the singular L1 scenario ------------------------------------------------

@dataclass(frozen=True)
class SingularData:
    """``f = |x - x0|^-a`` and optionally ``theta0 = |x - x1|^-b``; both are
    integrable but not square-integrable in two dimensions for
    ``1 <= a, b < 2``."""

    x0: tuple = (0.4137, 0.5291)
    a: float = 1.5
    x1: tuple | None = None
    b: float = 1.0

    def __post_init__(self):
        if not 0 < self.a < 2:
            raise InputError(f"source exponent must lie in (0, 2) to stay integrable, got {self.a}")
        if self.x1 is not None and not 0 < self.b < 2:
            raise InputError(f"initial exponent must lie in (0, 2), got {self.b}")

    def source(self, x, y, t=0.0):
        with np.errstate(divide="ignore"):
            return np.hypot(x - self.x0[0], y - self.x0[1]) ** (-self.a)

    def theta0(self, x, y):
        if self.x1 is None:
            return np.zeros(np.shape(x))
        with np.errstate(divide="ignore"):
            return np.hypot(x - self.x1[0], y - self.x1[1]) ** (-self.b)

    def problem(self, mesh, times, eps, quad_order=4) -> HeatProblem:
        level = 1.0 / eps
        src = lambda x, y, t: truncate(self.source(x, y), level)
        th0 = truncate(self.theta0(mesh.nodes[:, 0], mesh.nodes[:, 1]), level)
        return HeatProblem(mesh, times, src, th0, quad_order, label=f"eps={eps:g}")
