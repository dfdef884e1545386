"""Monotone flow laws ``G(theta, Td)`` and their runtime validators.

The shipped family is Norton-Hoff, ``G = s * phi(theta) * |Td|^(p(x)-2) Td``,
with a temperature factor ``phi`` confined to ``[phi_min, phi_max]``.  With
``a = s * phi`` and the matched pair ``M = |.|^p/p``, ``M* = |.|^p'/p'`` one
has, for every ``Td``,

    G : Td / (M(Td) + M*(G)) = a / (1/p + a^p'/p')  =: c(a, p),

which increases for ``a < 1``, decreases for ``a > 1`` and peaks at 1.  The
declared coercivity constant is therefore the smaller of the endpoint values
over the admissible ``a`` interval, minimised over ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from . import tensors
from .errors import InputError
from .orlicz import Exponent

TRACE_TOL = 1e-10
COERCIVITY_RTOL = 1e-12


def coercivity_ratio(a, p):
    """``c(a, p) = a / (1/p + a^p'/p')`` for the matched power pair."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    q = p / (p - 1.0)
    return a / (1.0 / p + a ** q / q)


class NortonHoff:
    family = "norton-hoff-power"

    def __init__(self, exponent, phi: Callable | None = None, phi_bounds=(1.0, 1.0), scale=1.0):
        if not isinstance(exponent, Exponent):
            exponent = Exponent.constant(exponent)
        lo, hi = (float(b) for b in phi_bounds)
        if not (0 < lo <= hi < np.inf):
            raise InputError(f"temperature factor bounds {phi_bounds} must satisfy 0 < lo <= hi < inf")
        self.exponent = exponent
        self.phi_bounds = (lo, hi)
        self._phi = phi
        if isinstance(scale, str):
            if scale != "auto":
                raise InputError(f"scale must be positive or 'auto', got {scale!r}")
            scale = auto_scale(exponent, (lo, hi))
        scale = float(scale)
        if not scale > 0:
            raise InputError(f"scale must be positive, got {scale}")
        self.scale = scale

    def phi(self, theta):
        """Temperature factor, evaluated at ``max(theta, 0)`` and clipped to
        the declared bounds."""
        theta = np.maximum(np.asarray(theta, dtype=float), 0.0)
        if self._phi is None:
            vals = np.ones(theta.shape)
        else:
            vals = np.broadcast_to(np.asarray(self._phi(theta), dtype=float), theta.shape)
        return np.clip(vals, *self.phi_bounds)

    def __call__(self, theta, Td, x):
        Td = np.asarray(Td, dtype=float)
        p = self.exponent(np.asarray(x, dtype=float))
        r = tensors.norm(Td)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(r > 0, r ** (p - 2.0), 0.0)
        amp = self.scale * self.phi(theta) * factor
        return amp[..., None, None] * Td

    def declared_c(self) -> float:
        return declared_c(self.exponent, self.phi_bounds, self.scale)

    def __repr__(self):
        return (f"NortonHoff({self.exponent.describe()}, phi in [{self.phi_bounds[0]:g}, "
                f"{self.phi_bounds[1]:g}], scale={self.scale:.6g})")


class CustomG:
    """User flow law ``func(theta, Td, x) -> G`` (vectorised). Carries no
    declared coercivity constant."""

    family = "custom"

    def __init__(self, func: Callable, name: str = "custom", exponent=None):
        self.func = func
        self.name = name
        self.exponent = exponent
        self.scale = 1.0

    def __call__(self, theta, Td, x):
        return np.asarray(self.func(theta, Td, x), dtype=float)

    def declared_c(self):
        return None

    def __repr__(self):
        return f"CustomG({self.name})"


def eval_G(model, theta, Td, x):
    """Flow-law value with a tracelessness check on the input."""
    Td = np.asarray(Td, dtype=float)
    tr = np.abs(tensors.trace(Td))
    if np.any(tr > TRACE_TOL * np.maximum(tensors.norm(Td), np.finfo(float).tiny)):
        raise InputError("eval_G needs a traceless stress argument")
    return model(theta, Td, x)


def declared_c(exponent: Exponent, phi_bounds, scale) -> float:
    """Global infimum of ``c(a, p)`` over ``a in scale*[phi_min, phi_max]``
    and ``p in [p_min, p_max]``."""
    a_ends = (scale * phi_bounds[0], scale * phi_bounds[1])
    if exponent.is_constant:
        return float(min(coercivity_ratio(a, exponent.p_min) for a in a_ends))
    grid = np.linspace(exponent.p_min, exponent.p_max, 201)
    best = np.inf
    for a in a_ends:
        vals = coercivity_ratio(a, grid)
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        cand = vals[i]
        if hi > lo:
            res = minimize_scalar(lambda p: float(coercivity_ratio(a, p)), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-12})
            cand = min(cand, res.fun)
        best = min(best, cand)
    return float(best)


def auto_scale(exponent: Exponent, phi_bounds) -> float:
    """Scale maximising the declared coercivity constant."""
    lo, hi = phi_bounds
    if lo == hi:
        return 1.0 / lo
    res = minimize_scalar(lambda s: -declared_c(exponent, phi_bounds, s),
                          bounds=(1.0 / hi, 1.0 / lo), method="bounded", options={"xatol": 1e-13})
    return float(res.x)


# -- validators ---------------------------------------------------------------

def random_traceless(rng, n, mag_range=(0.1, 10.0)):
    a = tensors.dev(tensors.sym(rng.standard_normal((n, 3, 3))))
    mags = np.exp(rng.uniform(np.log(mag_range[0]), np.log(mag_range[1]), size=n))
    return a * (mags / tensors.norm(a))[:, None, None]


@dataclass(frozen=True)
class MonotonicityReport:
    min_gap: float
    min_relative_gap: float
    samples: int
    passed: bool


def check_monotonicity(model, n=10_000, points=None, theta_range=(0.0, 10.0), rng=None,
                       mag_range=(0.1, 10.0)) -> MonotonicityReport:
    """Minimum of ``(G(theta,T1) - G(theta,T2)) : (T1 - T2)`` over random
    samples; passes when it is at least ``-1e-12 * scale``."""
    if n < 1:
        raise InputError("check_monotonicity needs at least one sample")
    rng = np.random.default_rng(0) if rng is None else rng
    x = _sample_points(rng, n, points, model)
    theta = rng.uniform(*theta_range, size=n)
    T1 = random_traceless(rng, n, mag_range)
    T2 = random_traceless(rng, n, mag_range)
    dG = model(theta, T1, x) - model(theta, T2, x)
    dT = T1 - T2
    gap = tensors.ddot(dG, dT)
    rel = gap / np.maximum(tensors.norm(dG) * tensors.norm(dT), np.finfo(float).tiny)
    mg = float(gap.min())
    return MonotonicityReport(mg, float(rel.min()), n, mg >= -1e-12 * model.scale)


@dataclass(frozen=True)
class CoercivityReport:
    declared_c: float | None
    sampled_inf: float
    per_theta_inf: np.ndarray
    dissipation_min: float
    passed: bool


def check_coercivity(model, M, Mstar, n=10_000, points=None, theta_grid=None, rng=None,
                     mag_range=(1e-2, 1e2)) -> CoercivityReport:
    """Sampled ``inf G:Td / (M(Td) + M*(G))`` per temperature and globally."""
    rng = np.random.default_rng(0) if rng is None else rng
    theta_grid = np.linspace(0.0, 10.0, 11) if theta_grid is None else np.asarray(theta_grid, dtype=float)
    per = np.empty(len(theta_grid))
    diss = np.inf
    for i, th in enumerate(theta_grid):
        x = _sample_points(rng, n, points, model)
        T = random_traceless(rng, n, mag_range)
        G = model(np.full(n, th), T, x)
        work = tensors.ddot(G, T)
        ratio = work / (M(x, T) + Mstar(x, G))
        per[i] = ratio.min()
        diss = min(diss, float(work.min()))
    inf = float(per.min())
    c = model.declared_c()
    # the ratio is exact algebra for the shipped family; allow round-off only
    ok = inf > 0 and diss >= 0 and (c is None or inf >= c * (1.0 - COERCIVITY_RTOL))
    return CoercivityReport(c, inf, per, diss, bool(ok))


def continuity_modulus(model, n=1000, h=1e-6, points=None, rng=None) -> float:
    """Largest ``|G(theta+h, T+hE) - G(theta, T)| / (h (1 + |G|))`` over
    random samples and unit perturbations ``E``: a finite-difference proxy
    for a modulus of continuity."""
    rng = np.random.default_rng(0) if rng is None else rng
    x = _sample_points(rng, n, points, model)
    theta = rng.uniform(0.0, 10.0, size=n)
    T = random_traceless(rng, n)
    E = random_traceless(rng, n, (1.0, 1.0))
    G0 = model(theta, T, x)
    G1 = model(theta + h, T + h * E, x)
    return float(np.max(tensors.norm(G1 - G0) / (h * (1.0 + tensors.norm(G0)))))


def _sample_points(rng, n, points, model):
    if points is not None:
        pts = np.asarray(points, dtype=float)
        return pts[rng.integers(0, len(pts), size=n)]
    exp = getattr(model, "exponent", None)
    dom = getattr(exp, "domain", None) or (1.0, 1.0)
    return rng.uniform(0.0, 1.0, size=(n, 2)) * np.asarray(dom, dtype=float)
