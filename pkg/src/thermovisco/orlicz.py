"""Generalized Orlicz kernel: N-functions, conjugates, modulars and norms.

An N-function here is radial in the tensor argument, ``M(x, xi) = m(x, |xi|)``
with ``|.|`` the Frobenius norm, so its conjugate is the one-dimensional
Legendre transform ``M*(x, eta) = sup_r (r |eta| - m(x, r))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import tensors
from .errors import DomainError, InputError, UnsupportedError

DEFAULT_RADIAL_GRID = np.geomspace(1e-8, 1e8, 2048)
_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


class Exponent:
    """Spatially varying exponent ``p(x)`` with values in ``[p_min, p_max]``.

    Built from a constant, a vectorised callable ``f(x, y)`` or nodal values
    on a mesh (P1 interpolation).
    """

    def __init__(self, func, p_min, p_max, *, domain=None, key=None):
        self._func = func
        self.p_min = float(p_min)
        self.p_max = float(p_max)
        self.domain = domain
        self.key = key
        self._cache = None
        if not (1.0 < self.p_min <= self.p_max < np.inf):
            raise InputError(f"exponent range [{self.p_min}, {self.p_max}] must lie in (1, inf)")

    @classmethod
    def constant(cls, p, domain=None):
        p = float(p)
        return cls(lambda x, y: np.full(np.shape(x), p), p, p, domain=domain, key=("const", p))

    @classmethod
    def from_function(cls, func, domain, *, samples=201, key=None):
        Lx, Ly = domain
        X, Y = np.meshgrid(np.linspace(0, Lx, samples), np.linspace(0, Ly, samples))
        vals = np.asarray(func(X, Y), dtype=float)
        return cls(func, vals.min(), vals.max(), domain=domain, key=key)

    @classmethod
    def from_nodal(cls, mesh, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise InputError(f"nodal exponent needs {mesh.n_nodes} values, got {values.shape}")
        func = lambda x, y: mesh.interpolate(values, np.column_stack([np.ravel(x), np.ravel(y)])).reshape(np.shape(x))
        return cls(func, values.min(), values.max(), domain=(mesh.Lx, mesh.Ly),
                   key=("nodal", values.tobytes()))

    @property
    def is_constant(self) -> bool:
        return self.p_min == self.p_max

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.full(x.shape[:-1], self.p_min)
        cache = self._cache
        if cache is not None and cache[0] is x:
            return cache[1]
        if self.domain is not None:
            Lx, Ly = self.domain
            tol = 1e-12 * max(Lx, Ly)
            if np.any((x[..., 0] < -tol) | (x[..., 0] > Lx + tol) | (x[..., 1] < -tol) | (x[..., 1] > Ly + tol)):
                raise DomainError(f"exponent evaluated outside [0,{Lx}]x[0,{Ly}]")
        p = np.asarray(self._func(x[..., 0], x[..., 1]), dtype=float)
        p = np.broadcast_to(p, x.shape[:-1])
        self._cache = (x, p)
        return p

    def conjugate(self) -> "Exponent":
        base = self
        return Exponent(lambda x, y: (lambda p: p / (p - 1.0))(np.asarray(base._func(x, y), dtype=float)),
                        self.p_max / (self.p_max - 1.0), self.p_min / (self.p_min - 1.0),
                        domain=self.domain, key=("conj", self.key))

    def same_as(self, other: "Exponent") -> bool:
        if self.key is not None and other.key is not None:
            return self.key == other.key
        return self is other

    def describe(self) -> str:
        if self.is_constant:
            return f"p={self.p_min:g}"
        return f"p(x) in [{self.p_min:g}, {self.p_max:g}]"


class NFunction:
    """Radial N-function ``M(x, xi) = m(x, |xi|)``."""

    family = "user-radial"
    domain = None

    def radial(self, x, r):
        raise NotImplementedError

    def _check_domain(self, x):
        if self.domain is None:
            return
        Lx, Ly = self.domain
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(Lx, Ly)
        if np.any((x[..., 0] < -tol) | (x[..., 0] > Lx + tol) | (x[..., 1] < -tol) | (x[..., 1] > Ly + tol)):
            raise DomainError(f"N-function evaluated outside [0,{Lx}]x[0,{Ly}]")

    def __call__(self, x, xi):
        """``M(x, xi)`` for tensors ``xi`` of shape (..., 3, 3) at points
        ``x`` of shape (..., 2) (broadcast against ``xi.shape[:-2]``)."""
        self._check_domain(x)
        return self.radial(x, tensors.norm(xi))


def eval_M(M: NFunction, x, xi) -> np.ndarray:
    return M(x, xi)


class PowerNFunction(NFunction):
    """``M(x, xi) = |xi|^p(x) / p(x)``."""

    family = "variable-exponent-power"

    def __init__(self, exponent: Exponent):
        if not isinstance(exponent, Exponent):
            exponent = Exponent.constant(exponent)
        self.exponent = exponent
        self.domain = exponent.domain

    def radial(self, x, r):
        p = self.exponent(np.asarray(x, dtype=float))
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, np.abs(r) ** p / p, 0.0)

    def radial_derivative(self, x, r):
        p = self.exponent(np.asarray(x, dtype=float))
        return np.abs(r) ** (p - 1.0)

    def __repr__(self):
        return f"PowerNFunction({self.exponent.describe()})"


class RadialNFunction(NFunction):
    """User N-function given by a vectorised profile ``m(r)`` (x-independent)."""

    def __init__(self, profile: Callable, name: str = "user"):
        self.profile = profile
        self.name = name

    def radial(self, x, r):
        r = np.abs(np.asarray(r, dtype=float))
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.profile(r), dtype=float)
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, x.shape[:-1]))

    def __repr__(self):
        return f"RadialNFunction({self.name})"


class TabulatedRadialNFunction(NFunction):
    """Radial N-function known on a table ``(r_j, m_j)``; monotone cubic
    interpolation in log-log coordinates, power-law extrapolation."""

    def __init__(self, r, values, name="tabulated"):
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        keep = (r > 0) & (values > 0) & np.isfinite(values)
        self.r, self.values, self.name = r[keep], values[keep], name
        lr, lv = np.log(self.r), np.log(self.values)
        self._interp = PchipInterpolator(lr, lv, extrapolate=False)
        self._lo = (lr[0], lv[0], (lv[1] - lv[0]) / (lr[1] - lr[0]))
        self._hi = (lr[-1], lv[-1], (lv[-1] - lv[-2]) / (lr[-1] - lr[-2]))

    def radial(self, x, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros(r.shape)
        pos = r > 0
        lr = np.log(r[pos])
        lv = self._interp(lr)
        lo, hi = lr < self._lo[0], lr > self._hi[0]
        lv[lo] = self._lo[1] + self._lo[2] * (lr[lo] - self._lo[0])
        lv[hi] = self._hi[1] + self._hi[2] * (lr[hi] - self._hi[0])
        out[pos] = np.exp(lv)
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(out, np.broadcast_shapes(out.shape, x.shape[:-1]))

    def __repr__(self):
        return f"TabulatedRadialNFunction({self.name}, {len(self.r)} nodes)"


# -- Legendre transform ------------------------------------------------------

def legendre_radial(profile: Callable, eta, radial_grid=DEFAULT_RADIAL_GRID, refine_iters=80):
    """Numeric ``sup_{r>=0} (r*eta - m(r))`` for a convex radial profile.

    The supremum is first located on ``radial_grid`` and then refined by a
    golden-section search on the two adjacent grid cells.  ``r = 0`` is always
    a candidate, so the result is non-negative.
    """
    eta = np.atleast_1d(np.abs(np.asarray(eta, dtype=float)))
    grid = np.concatenate([[0.0], np.asarray(radial_grid, dtype=float)])
    mvals = np.asarray(profile(grid), dtype=float)
    out = np.empty(eta.shape)
    for start in range(0, eta.size, 512):
        e = eta.ravel()[start:start + 512]
        obj = e[:, None] * grid[None, :] - mvals[None, :]
        j = np.argmax(obj, axis=1)
        lo = grid[np.maximum(j - 1, 0)]
        hi = grid[np.minimum(j + 1, len(grid) - 1)]
        best = obj[np.arange(len(e)), j]
        a, b = lo.copy(), hi.copy()
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        fc = e * c - profile(c)
        fd = e * d - profile(d)
        for _ in range(refine_iters):
            left = fc > fd
            a, b = np.where(left, a, c), np.where(left, d, b)
            c_new = np.where(left, b - _GOLDEN * (b - a), d)
            d_new = np.where(left, c, a + _GOLDEN * (b - a))
            fc, fd = (np.where(left, e * c_new - profile(c_new), fd),
                      np.where(left, fc, e * d_new - profile(d_new)))
            c, d = c_new, d_new
            if np.all(b - a <= 1e-15 * np.maximum(b, 1e-300)):
                break
        xm = 0.5 * (a + b)
        out.ravel()[start:start + 512] = np.maximum(best, e * xm - profile(xm))
    return out.reshape(eta.shape)


@dataclass
class ComplementaryNFunction:
    """Conjugate ``M*`` of a radial N-function: closed form for the power
    family, tabulated numeric Legendre transform otherwise."""

    primal: NFunction
    function: NFunction
    closed_form: bool
    table: tuple | None = field(default=None, repr=False)

    def __call__(self, x, eta):
        return self.function(x, eta)

    def radial(self, x, r):
        return self.function.radial(x, r)

    @property
    def domain(self):
        return self.function.domain


def complementary(M: NFunction, radial_grid=None, *, closed_form: bool = True) -> ComplementaryNFunction:
    """Build ``M*`` for a radial N-function.

    For the power family the conjugate exponent ``p/(p-1)`` is used unless
    ``closed_form=False``; other radial profiles are tabulated at the secant
    slopes of ``radial_grid`` (default 2048 log-spaced points in [1e-8, 1e8]).
    """
    if not isinstance(M, NFunction):
        raise UnsupportedError(f"conjugation needs a radial N-function, got {type(M).__name__}")
    if isinstance(M, PowerNFunction) and closed_form:
        return ComplementaryNFunction(M, PowerNFunction(M.exponent.conjugate()), True)
    if isinstance(M, PowerNFunction):
        if not M.exponent.is_constant:
            raise UnsupportedError("numeric conjugation of an x-dependent exponent is not tabulated; "
                                   "use the closed form")
        p = M.exponent.p_min
        profile = lambda r: np.abs(r) ** p / p
    elif isinstance(M, (RadialNFunction, TabulatedRadialNFunction)):
        profile = lambda r: M.radial(np.zeros(2), r)
    else:
        raise UnsupportedError(f"{type(M).__name__} is not radial; numeric conjugation unsupported")
    grid = DEFAULT_RADIAL_GRID if radial_grid is None else np.asarray(radial_grid, dtype=float)
    eta = conjugate_grid(profile, grid)
    values = legendre_radial(profile, eta, grid)
    tab = TabulatedRadialNFunction(eta, values, name=f"conj({getattr(M, 'name', M.family)})")
    return ComplementaryNFunction(M, tab, False, table=(eta, values))


def conjugate_grid(profile, radial_grid):
    """Secant slopes of the profile: the dual points whose maximiser lies
    strictly inside the radial grid."""
    r = np.asarray(radial_grid, dtype=float)
    m = np.asarray(profile(r), dtype=float)
    slopes = np.diff(m) / np.diff(r)
    mid = 0.5 * (slopes[1:] + slopes[:-1])
    return mid[mid > 0]


# -- modulars and norms ------------------------------------------------------

def modular(M, field, points, weights) -> float:
    """Quadrature value of ``int M(x, field) dx (dt)``.

    ``field`` has shape (..., nq, 3, 3); ``weights`` broadcasts against
    ``field.shape[:-2]`` and carries the space(-time) measure.
    """
    field = np.asarray(field, dtype=float)
    vals = M(points, field)
    return float(np.sum(np.broadcast_to(weights, vals.shape) * vals))


def luxemburg_norm(M, field, points, weights, rtol=1e-10) -> float:
    """``inf{lam > 0 : int M(x, field/lam) <= 1}`` by bisection."""
    field = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(field)):
        raise InputError("Luxemburg norm of a field with non-finite values")
    if not np.any(field):
        return 0.0
    lo, hi = 1e-12, 1.0
    while modular(M, field / hi, points, weights) > 1.0:
        lo, hi = hi, 2.0 * hi
    if modular(M, field / lo, points, weights) <= 1.0:
        return lo
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if modular(M, field / mid, points, weights) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def orlicz_norm(M, field, points, weights) -> float:
    """Orlicz norm through the Amemiya formula ``inf_k (1 + rho(k f)) / k``."""
    from scipy.optimize import minimize_scalar

    field = np.asarray(field, dtype=float)
    if not np.any(field):
        return 0.0
    lux = luxemburg_norm(M, field, points, weights)
    g = lambda s: (1.0 + modular(M, np.exp(s) * field, points, weights)) * np.exp(-s)
    s0 = -np.log(lux)
    res = minimize_scalar(g, bracket=(s0 - 1.0, s0, s0 + 1.0), tol=1e-12)
    return float(min(res.fun, g(s0)))


@dataclass(frozen=True)
class ModularReport:
    modular: float
    luxemburg: float
    orlicz: float
    orlicz_bracket: tuple

    @property
    def bracket_ok(self) -> bool:
        lo, hi = self.orlicz_bracket
        tol = 1e-8 * max(hi, 1e-300)
        return lo - tol <= self.orlicz <= hi + tol


def modular_report(M, field, points, weights) -> ModularReport:
    lux = luxemburg_norm(M, field, points, weights)
    return ModularReport(modular(M, field, points, weights), lux,
                         orlicz_norm(M, field, points, weights), (lux, 2.0 * lux))


def fenchel_young_gap(M, Mstar, x, xi, eta):
    """``M(x, xi) + M*(x, eta) - xi : eta`` (non-negative up to round-off)."""
    return M(x, xi) + Mstar(x, eta) - tensors.ddot(xi, eta)


# -- structural checks -------------------------------------------------------

@dataclass(frozen=True)
class Delta2Report:
    c_estimate: float
    h_integral: float
    satisfied: bool
    ratio_growth: float


def check_delta2(M, sample_points, sample_tensors) -> Delta2Report:
    """Doubling constant of ``M``.

    The power family reports the exact ``c = 2^p_max`` with ``h = 0``.  Other
    profiles report the sampled supremum of ``M(x, 2xi)/M(x, xi)`` and flag a
    failure when that ratio keeps growing with ``|xi|`` (largest-magnitude
    decile against the median).
    """
    if isinstance(M, PowerNFunction):
        return Delta2Report(2.0 ** M.exponent.p_max, 0.0, True, 1.0)
    x = np.asarray(sample_points, dtype=float)
    xi = np.asarray(sample_tensors, dtype=float)
    if xi.size == 0:
        raise InputError("check_delta2 needs samples")
    base = M(x, xi)
    ok = base > 0
    ratio = M(x, 2.0 * xi)[ok] / base[ok]
    mags = tensors.norm(xi)[ok]
    order = np.argsort(mags)
    ratio = ratio[order]
    n = len(ratio)
    top = ratio[int(0.9 * n):].max()
    med = np.median(ratio)
    growth = float(top / med)
    return Delta2Report(float(ratio.max()), 0.0, bool(growth <= 2.0 and np.isfinite(top)), growth)


def check_nfunction(M, points, rng=None, n=256) -> dict:
    """Sampled verification of the five N-function conditions."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = np.asarray(points, dtype=float)
    idx = rng.integers(0, len(pts), size=n)
    x = pts[idx]
    xi = _random_sym(rng, n) * np.exp(rng.uniform(-3, 3, size=n))[:, None, None]
    eta = _random_sym(rng, n) * np.exp(rng.uniform(-3, 3, size=n))[:, None, None]
    zero = np.zeros((n, 3, 3))
    m_xi, m_eta = M(x, xi), M(x, eta)
    unit = xi / tensors.norm(xi)[:, None, None]
    slope1 = M(x, unit)
    # probes at 1e-12 and 1e12 resolve power growth down to p of about 1.09
    small = M(x, 1e-12 * unit) / 1e-12
    large = M(x, 1e12 * unit) / 1e12
    return {
        "zero_only_at_origin": bool(np.all(M(x, zero) == 0) and np.all(m_xi > 0)),
        "even": bool(np.allclose(M(x, -xi), m_xi, rtol=1e-14, atol=0)),
        "convex": bool(np.all(M(x, 0.5 * (xi + eta)) <= 0.5 * (m_xi + m_eta) + 1e-12)),
        "sublinear_at_zero": bool(np.all(small < 0.1 * slope1)),
        "superlinear_at_infinity": bool(np.all(large > 10.0 * slope1)),
    }


@dataclass(frozen=True)
class QuadraticBoundReport:
    passed: bool
    worst_ratio: float
    eta_range: tuple
    integral_lhs: float
    integral_rhs: float


def check_quadratic_bound(Mstar, points, eta_floor=0.5, eta_cap=3.0, n=64, rng=None) -> QuadraticBoundReport:
    """Gate ``M*(x, eta) <= |eta|^2`` on the reachable magnitude range.

    Pointwise on a log grid of ``|eta|`` in ``[eta_floor, eta_cap]`` at every
    supplied point, plus the integrated form on random fields in that range.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    pts = np.asarray(points, dtype=float)
    mags = np.geomspace(eta_floor, eta_cap, n)
    unit = np.zeros((3, 3))
    unit[0, 0], unit[1, 1] = np.sqrt(0.5), -np.sqrt(0.5)
    vals = Mstar(pts[:, None, :], mags[None, :, None, None] * unit)
    ratio = vals / mags[None, :] ** 2
    fields = _random_sym(rng, len(pts))
    fields *= (rng.uniform(eta_floor, eta_cap, size=len(pts)) / tensors.norm(fields))[:, None, None]
    lhs = float(np.sum(Mstar(pts, fields)))
    rhs = float(np.sum(tensors.ddot(fields, fields)))
    worst = float(ratio.max())
    return QuadraticBoundReport(bool(worst <= 1.0 + 1e-12 and lhs <= rhs), worst,
                                (float(eta_floor), float(eta_cap)), lhs, rhs)


def _random_sym(rng, n):
    a = rng.standard_normal((n, 3, 3))
    return tensors.sym(a)
