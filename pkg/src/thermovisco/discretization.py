"""Galerkin bases on the background P1 discretization.

Three families are built on a :class:`~thermovisco.mesh.Mesh`:

* Neumann-Laplacian modes ``v_m`` (temperature), L2-orthonormal;
* elasto-static modes ``w_n`` of ``-div D eps(.)`` with zero Dirichlet data,
  L2-orthonormal, with their piecewise-constant strains ``eps(w_n)``;
* ``zeta_m``, a D-orthonormal family in the D-orthogonal complement of
  ``span{eps(w_1..w_k)}`` inside the piecewise-constant plane-strain tensor
  space.

Strain and stress fields are arrays of shape ``(..., E, 3, 3)`` (one tensor
per element); the elasticity tensor acts on the element axis ``-3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh as fem
from . import tensors
from .errors import ConfigError, InputError, NumericError

DENSE_LIMIT = 1600
EIG_TOL = 1e-10


class ElasticityTensor:
    """Element-wise constant elasticity tensor ``D``.

    Either isotropic (Lamé fields ``lam``, ``mu`` per element) or a full
    4-index array ``d_ijkl`` per element.
    """

    def __init__(self, lam=None, mu=None, full=None):
        if full is not None:
            full = np.asarray(full, dtype=float)
            if full.ndim != 5 or full.shape[1:] != (3, 3, 3, 3):
                raise InputError(f"full elasticity tensor must have shape (E,3,3,3,3), got {full.shape}")
            _validate_symmetries(full)
            _validate_plane_strain(full)
            self.full, self.lam, self.mu = full, None, None
        else:
            self.lam = np.atleast_1d(np.asarray(lam, dtype=float))
            self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
            self.full = None
        d0 = self.coercivity()
        if not d0 > 0:
            raise InputError(f"elasticity tensor is not positive definite (d0={d0:g})")

    @classmethod
    def isotropic(cls, mesh, lam, mu):
        """Isotropic tensor from constants, nodal arrays or element arrays."""
        return cls(lam=_element_field(mesh, lam), mu=_element_field(mesh, mu))

    @property
    def is_isotropic(self) -> bool:
        return self.full is None

    def apply(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.full is not None:
            return np.einsum("eijkl,...ekl->...eij", self.full, xi)
        tr = tensors.trace(xi)
        return (self.lam * tr)[..., None, None] * tensors.IDENTITY + 2.0 * self.mu[:, None, None] * xi

    def coercivity(self) -> float:
        """``d0 = min over elements of min_{|xi|=1} xi : D xi``."""
        if self.full is None:
            return float(min(np.min(2 * self.mu), np.min(3 * self.lam + 2 * self.mu)))
        basis = tensors.canonical_basis(tensors._COMPONENTS)
        mat = np.einsum("aij,eijkl,bkl->eab", basis, self.full, basis)
        return float(np.linalg.eigvalsh(mat).min())

    def inner(self, xi, eta, areas):
        """D-inner product ``int D xi : eta`` of element-wise tensor fields."""
        return np.einsum("e,...eij,...eij->...", areas, self.apply(xi), eta)


def _element_field(mesh, value):
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return np.full(mesh.n_elements, float(value))
    if value.shape == (mesh.n_nodes,):
        return value[mesh.triangles].mean(axis=1)
    if value.shape == (mesh.n_elements,):
        return value
    raise InputError(f"field of shape {value.shape} is neither nodal nor element-wise")


def _validate_symmetries(d, tol=1e-12):
    scale = max(np.abs(d).max(), 1.0)
    for name, perm in (("d_ijkl = d_jikl", (0, 2, 1, 3, 4)),
                       ("d_ijkl = d_ijlk", (0, 1, 2, 4, 3)),
                       ("d_ijkl = d_klij", (0, 3, 4, 1, 2))):
        if np.abs(d - d.transpose(perm)).max() > tol * scale:
            raise InputError(f"elasticity tensor violates the symmetry {name}")


def _validate_plane_strain(d, tol=1e-12):
    scale = max(np.abs(d).max(), 1.0)
    inplane = [(0, 0), (1, 1), (2, 2), (0, 1)]
    for i, j in inplane:
        for k, l in ((0, 2), (1, 2)):
            if abs(d[:, i, j, k, l]).max() > tol * scale:
                raise InputError("elasticity tensor couples in-plane and out-of-plane shear; "
                                 "not representable under plane strain")


# -- eigen-solvers -----------------------------------------------------------

def _smallest_eigenpairs(K, M, n, shift):
    size = K.shape[0]
    if n < 1 or n > size:
        raise ConfigError(f"requested {n} eigenpairs of a {size}-dimensional problem")
    if size <= DENSE_LIMIT:
        vals, vecs = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, n - 1])
    else:
        v0 = np.linspace(1.0, 2.0, size)
        vals, vecs = spla.eigsh(K.tocsc(), k=n, M=M.tocsc(), sigma=shift, which="LM",
                                tol=EIG_TOL, v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    # M-orthonormalise (guards against drift inside degenerate clusters)
    gram = vecs.T @ (M @ vecs)
    L = np.linalg.cholesky(0.5 * (gram + gram.T))
    vecs = sla.solve_triangular(L, vecs.T, lower=True).T
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs *= np.sign(vecs[idx, np.arange(vecs.shape[1])])
    res = np.linalg.norm(K @ vecs - (M @ vecs) * vals, axis=0)
    # relative to the spectral scale of the computed window (robust at zero eigenvalues)
    scale = max(np.abs(vals).max(), 1e-300) * np.linalg.norm(M @ vecs, axis=0)
    rel = res / scale
    if np.any(rel > 1e-8):
        raise NumericError(f"eigen-solver residual too large (max relative residual {rel.max():.3e})",
                           residual=rel)
    return vals, vecs


def neumann_eigenbasis(mesh, l):
    """``l`` smallest eigenpairs of the Neumann Laplacian, ``K v = mu M v``.

    Returns ``(V, mu)`` with nodal eigenvectors as columns of ``V``,
    orthonormal in L2 and orthogonal in the stiffness product.
    """
    if l < 1 or l > mesh.n_nodes - 1:
        raise ConfigError(f"l={l} must lie in [1, {mesh.n_nodes - 1}]")
    K = fem.scalar_stiffness(mesh)
    M = fem.scalar_mass(mesh)
    mu, V = _smallest_eigenpairs(K, M, l, shift=-1.0)
    # the constant mode: exact kernel of the Neumann operator
    V[:, 0] = 1.0 / np.sqrt(mesh.measure)
    mu[0] = abs(mu[0]) if abs(mu[0]) > 1e-9 else 0.0
    return V, mu


def elastostatic_eigenbasis(mesh, D, k):
    """``k`` smallest eigenpairs of ``-div D eps(.)`` with zero Dirichlet data.

    Returns ``(W, lam, eps_w)``: nodal displacements ``W`` of shape
    ``(N, 2, k)``, eigenvalues, and element strains of shape ``(k, E, 3, 3)``.
    """
    interior = mesh.interior_nodes
    dofs = (interior[:, None] * 2 + np.arange(2)).ravel()
    if k < 1 or k > len(dofs):
        raise ConfigError(f"k={k} must lie in [1, {len(dofs)}] (two per interior node)")
    K = fem.elasticity_stiffness(mesh, D)[dofs][:, dofs]
    M = fem.vector_mass(mesh)[dofs][:, dofs]
    lam, vecs = _smallest_eigenpairs(K, M, k, shift=0.0)
    W = np.zeros((mesh.n_nodes * 2, k))
    W[dofs] = vecs
    W = W.reshape(mesh.n_nodes, 2, k)
    eps = np.stack([fem.element_strain(mesh, W[:, :, n]) for n in range(k)])
    return W, lam, eps


def complement_basis(mesh, D, eps_w, lam, l, spectral_modes=None, tol=1e-8):
    """D-orthonormal modes spanning part of the D-orthogonal complement of
    ``span{eps(w_n)}``.

    Candidates are taken in a fixed order: element averages of the supplied
    scalar modes times each plane-strain unit tensor (mode-major), then
    element indicator tensors sorted by descending D-norm of their residual
    after projection onto the complement.  Each candidate is projected and
    Gram-Schmidt orthonormalised twice; near-dependent ones are skipped.
    """
    E = mesh.n_elements
    dim = 4 * E
    k = len(lam)
    if l < 1 or l > dim - k:
        raise ConfigError(f"l={l} exceeds the complement dimension {dim - k}")
    areas = mesh.areas
    unit = tensors.canonical_basis()
    Deps = D.apply(eps_w) if k else np.zeros((0, E, 3, 3))
    chosen, Dchosen = [], []

    def project(c):
        if k:
            coef = np.einsum("e,neij,eij->n", areas, Deps, c) / lam
            c = c - np.einsum("n,neij->eij", coef, eps_w)
        for _ in range(2):
            if chosen:
                Z, DZ = np.array(chosen), np.array(Dchosen)
                coef = np.einsum("e,meij,eij->m", areas, DZ, c)
                c = c - np.einsum("m,meij->eij", coef, Z)
        return c

    def offer(c):
        n0 = np.sqrt(D.inner(c, c, areas))
        if n0 == 0:
            return
        r = project(c)
        nr = np.sqrt(max(D.inner(r, r, areas), 0.0))
        if nr > tol * n0:
            z = r / nr
            chosen.append(z)
            Dchosen.append(D.apply(z))

    if spectral_modes is not None:
        vbar = np.asarray(spectral_modes)[mesh.triangles].mean(axis=1)     # (E, s)
        for i in range(vbar.shape[1]):
            for e_c in unit:
                if len(chosen) == l:
                    break
                offer(vbar[:, i, None, None] * e_c)
    if len(chosen) < l:
        # indicators: residual norm^2 = |ind|_D^2 - sum_n (ind, eps_n)_D^2 / lam_n
        De = D.apply(np.broadcast_to(unit[:, None], (4, E, 3, 3)))         # (4,E,3,3)
        own = areas[None, :] * np.einsum("ceij,cij->ce", De, unit)
        if k:
            cross = areas[None, None, :] * np.einsum("ceij,neij->nce", De, eps_w)
            own = own - np.einsum("nce,n->ce", cross ** 2, 1.0 / lam)
        flat = own.T.ravel()                                               # element-major
        order = np.argsort(-flat, kind="stable")
        for idx in order:
            if len(chosen) == l:
                break
            e, c = divmod(int(idx), 4)
            ind = np.zeros((E, 3, 3))
            ind[e] = unit[c]
            offer(ind)
    if len(chosen) < l:
        raise ConfigError(f"only {len(chosen)} independent complement modes found, l={l} requested")
    return np.array(chosen)


@dataclass
class GalerkinBases:
    mesh: object
    D: ElasticityTensor
    V: np.ndarray            # (N, l) temperature modes
    mu: np.ndarray           # (l,)
    W: np.ndarray            # (N, 2, k) displacement modes
    lam: np.ndarray          # (k,)
    eps_w: np.ndarray        # (k, E, 3, 3)
    zeta: np.ndarray         # (l, E, 3, 3)
    D_eps_w: np.ndarray = field(init=False, repr=False)
    D_zeta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.D_eps_w = self.D.apply(self.eps_w)
        self.D_zeta = self.D.apply(self.zeta)

    @property
    def k(self) -> int:
        return len(self.lam)

    @property
    def l(self) -> int:
        return len(self.mu)

    def gram_report(self) -> dict:
        """Maximum deviations of every Gram-matrix identity."""
        mesh, areas = self.mesh, self.mesh.areas
        M = fem.scalar_mass(mesh)
        Mv = fem.vector_mass(mesh)
        Wf = self.W.reshape(-1, self.k)
        g_v = self.V.T @ (M @ self.V)
        g_w = Wf.T @ (Mv @ Wf)
        g_ew = np.einsum("e,neij,meij->nm", areas, self.D_eps_w, self.eps_w)
        g_z = np.einsum("e,neij,meij->nm", areas, self.D_zeta, self.zeta)
        cross = np.einsum("e,neij,meij->nm", areas, self.D_zeta, self.eps_w)
        lam_scale = np.maximum(self.lam[:, None], self.lam[None, :])
        return {
            "v_orthonormal": float(np.abs(g_v - np.eye(self.l)).max()),
            "w_orthonormal": float(np.abs(g_w - np.eye(self.k)).max()),
            "eps_w_D_diagonal": float((np.abs(g_ew - np.diag(self.lam)) / lam_scale).max()),
            "zeta_orthonormal": float(np.abs(g_z - np.eye(self.l)).max()),
            "zeta_perp_eps_w": float(np.abs(cross).max()) if self.k else 0.0,
            "mu_first": float(self.mu[0]),
        }

    def check(self, tol=1e-8):
        rep = self.gram_report()
        bad = {k: v for k, v in rep.items() if k != "mu_first" and v > tol}
        if bad or abs(rep["mu_first"]) > tol:
            raise NumericError(f"Galerkin basis invariants violated: {rep}")
        return rep


def build_bases(mesh, D, k, l, check=True) -> GalerkinBases:
    V, mu = neumann_eigenbasis(mesh, l)
    W, lam, eps = elastostatic_eigenbasis(mesh, D, k)
    zeta = complement_basis(mesh, D, eps, lam, l, spectral_modes=V)
    bases = GalerkinBases(mesh, D, V, mu, W, lam, eps, zeta)
    if check:
        bases.check()
    return bases


# -- projections -------------------------------------------------------------

def project_scalar(field, bases):
    """L2 projection coefficients of a nodal scalar field on ``v_m``."""
    field = np.asarray(field, dtype=float)
    if field.shape != (bases.mesh.n_nodes,):
        raise InputError(f"scalar field must be nodal with {bases.mesh.n_nodes} values")
    return bases.V.T @ (fem.scalar_mass(bases.mesh) @ field)


def project_strain(field, bases):
    """D-projection ``(gamma, delta)`` of an element-wise tensor field:
    ``gamma_n = (f, eps(w_n))_D / lambda_n`` and ``delta_m = (f, zeta_m)_D``."""
    field = np.asarray(field, dtype=float)
    areas = bases.mesh.areas
    gamma = np.einsum("e,neij,eij->n", areas, bases.D_eps_w, field) / bases.lam
    delta = np.einsum("e,meij,eij->m", areas, bases.D_zeta, field)
    return gamma, delta


def reconstruct_strain(gamma, delta, bases):
    return (np.einsum("n,neij->eij", gamma, bases.eps_w)
            + np.einsum("m,meij->eij", delta, bases.zeta))


def reconstruct_scalar(beta, bases):
    return bases.V @ beta


def element_average(mesh, func, quad=None):
    """Element averages of ``func(x, y)`` (scalar or trailing-shaped)."""
    quad = mesh.quadrature() if quad is None else quad
    vals = np.asarray(func(quad.points[:, 0], quad.points[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (len(quad.weights),) + vals.shape[1:])
    w = quad.weights.reshape((-1,) + (1,) * (vals.ndim - 1))
    return quad.element_sum(w * vals) / mesh.areas.reshape((-1,) + (1,) * (vals.ndim - 1))
