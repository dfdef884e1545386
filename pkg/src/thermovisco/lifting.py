"""Auxiliary problems carrying the volume force and the boundary data.

* :func:`solve_static_elastic` solves ``-div D eps(u~) = f`` with ``u~ = g``
  on the boundary by writing ``u~ = u1 + g_h`` with ``u1`` vanishing on the
  boundary and ``g_h`` the nodal interpolant of ``g``.
* :func:`solve_lifting_heat` solves ``theta~_t - Laplace theta~ = 0`` with
  Neumann flux ``g_theta`` by implicit Euler on a given time grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import mesh as fem
from . import tensors
from .errors import ConfigError, InputError, NumericError


@dataclass(frozen=True)
class LiftingElastic:
    u: np.ndarray              # (N, 2) nodal displacement
    stress: np.ndarray         # (E, 3, 3)
    stress_dev: np.ndarray     # (E, 3, 3)
    stress_max: float          # max |T~| over elements (L-infinity proxy)
    residual: float            # relative residual of the interior linear system
    stability_ratio: float     # stress_max / (|f|_L2 + |g_h|_H1), 0 when both vanish

    @classmethod
    def zero(cls, mesh):
        z = np.zeros((mesh.n_elements, 3, 3))
        return cls(np.zeros((mesh.n_nodes, 2)), z, z.copy(), 0.0, 0.0, 0.0)


def _vector_values(func, x, y, n):
    if func is None:
        return np.zeros((n, 2))
    val = func(x, y)
    if isinstance(val, (tuple, list)):
        val = np.stack([np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in val], axis=-1)
    val = np.asarray(val, dtype=float)
    if val.shape != (n, 2):
        val = np.broadcast_to(val, (n, 2))
    if not np.all(np.isfinite(val)):
        raise InputError("vector load evaluates to non-finite values")
    return np.array(val)


def solve_static_elastic(mesh, D, f=None, g=None, quad_order=4) -> LiftingElastic:
    """Static elastic lifting for a volume force ``f(x, y) -> (fx, fy)`` and
    Dirichlet datum ``g(x, y) -> (gx, gy)`` (either may be ``None``)."""
    interior = mesh.interior_nodes
    if len(interior) == 0:
        raise ConfigError("mesh has no interior nodes; the Dirichlet problem is singular")
    quad = mesh.quadrature(quad_order)
    fq = _vector_values(f, quad.points[:, 0], quad.points[:, 1], len(quad.weights))
    b = fem.load_vector(mesh, quad, fq).ravel()
    gh = _vector_values(g, mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.n_nodes)
    gh_flat = gh.ravel()
    K = fem.elasticity_stiffness(mesh, D)
    dofs = (interior[:, None] * 2 + np.arange(2)).ravel()
    rhs = (b - K @ gh_flat)[dofs]
    Kii = K[dofs][:, dofs].tocsc()
    u = gh_flat.copy()
    if np.any(rhs):
        sol = spla.spsolve(Kii, rhs)
        res = np.linalg.norm(Kii @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.all(np.isfinite(sol)):
            raise NumericError("elastic lifting solve produced non-finite values")
        u[dofs] += sol
    else:
        res = 0.0
    u = u.reshape(mesh.n_nodes, 2)
    stress = D.apply(fem.element_strain(mesh, u))
    sdev = tensors.dev(stress)
    smax = float(tensors.norm(stress).max())
    f_l2 = float(np.sqrt(quad.integrate(np.sum(fq ** 2, axis=1))))
    grad_g = fem.element_gradient(mesh, gh)                          # (E, 2, 2)
    g_h1 = float(np.sqrt(np.sum(mesh.areas * np.sum(grad_g ** 2, axis=(1, 2)))
                         + gh_flat @ (fem.vector_mass(mesh) @ gh_flat)))
    denom = f_l2 + g_h1
    ratio = smax / denom if denom > 0 else 0.0
    return LiftingElastic(u, stress, sdev, smax, float(res), ratio)


@dataclass(frozen=True)
class LiftingHeat:
    times: np.ndarray          # (n_t,)
    theta: np.ndarray          # (n_t, N) nodal values
    sup_l1: float              # max_t |theta~(t)|_L1
    l2_h1: float               # |theta~|_{L2(0,T;W12)}, rectangle rule in time
    data_norm: float           # |g_theta|_{L2(boundary x (0,T))} + |theta~_0|_L2
    stability_ratio: float     # (sup_l1 + l2_h1) / data_norm, 0 when data vanish

    def at(self, t):
        """Linear interpolation in time of the nodal field."""
        times = self.times
        if t <= times[0]:
            return self.theta[0]
        if t >= times[-1]:
            return self.theta[-1]
        i = int(np.searchsorted(times, t, side="right")) - 1
        s = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - s) * self.theta[i] + s * self.theta[i + 1]

    @classmethod
    def zero(cls, mesh, times):
        times = np.asarray(times, dtype=float)
        return cls(times, np.zeros((len(times), mesh.n_nodes)), 0.0, 0.0, 0.0, 0.0)


def solve_lifting_heat(mesh, g_theta=None, theta0=None, times=(0.0,)) -> LiftingHeat:
    """Implicit-Euler P1 solution of the homogeneous heat equation with
    Neumann flux ``g_theta(x, y, t, normal)`` and initial nodal field
    ``theta0`` (``None`` means zero)."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) < 1 or np.any(np.diff(times) <= 0):
        raise InputError("time grid must be a strictly increasing 1-D array")
    N = mesh.n_nodes
    theta = np.zeros((len(times), N))
    if theta0 is not None:
        theta[0] = np.broadcast_to(np.asarray(theta0, dtype=float), (N,))
    M = fem.scalar_mass(mesh)
    K = fem.scalar_stiffness(mesh)
    lumped = fem.scalar_mass(mesh, lumped=True).diagonal()

    def flux(t):
        if g_theta is None:
            return np.zeros(N)
        return fem.boundary_load(mesh, lambda x, y, n: g_theta(x, y, t, n))

    factors = {}
    g_sq = 0.0
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        key = round(dt, 15)
        if key not in factors:
            factors[key] = spla.splu((M + dt * K).tocsc())
        theta[i] = factors[key].solve(M @ theta[i - 1] + dt * flux(times[i]))
        if g_theta is not None:
            gn = fem.boundary_l2_norm(mesh, lambda x, y, n: g_theta(x, y, times[i], n))
            g_sq += dt * gn ** 2
    if not np.all(np.isfinite(theta)):
        raise NumericError("lifting heat solve produced non-finite values")

    sup_l1 = float(np.max(np.abs(theta) @ lumped))
    energy = np.einsum("tn,tn->t", theta, (M @ theta.T).T + (K @ theta.T).T)
    l2_h1 = float(np.sqrt(np.sum(np.diff(times) * energy[1:]))) if len(times) > 1 else 0.0
    data = float(np.sqrt(g_sq) + np.sqrt(max(theta[0] @ (M @ theta[0]), 0.0)))
    ratio = (sup_l1 + l2_h1) / data if data > 0 else 0.0
    return LiftingHeat(times, theta, sup_l1, l2_h1, data, ratio)
