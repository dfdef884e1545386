"""Structured triangulations of a rectangle and P1 finite-element assembly.

Every square cell is split along its (i, j)-(i+1, j+1) diagonal, so all
triangles are right-angled.  Non-obtuse triangles give a stiffness matrix
with non-positive off-diagonal entries, which the order-preserving heat
solvers rely on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DomainError

# Symmetric Gauss rules on the reference triangle: barycentric points, weights
# normalised to sum to one.
_A4, _B4 = 0.445948490915965, 0.091576213509771
_W4A, _W4B = 0.223381589678011, 0.109951743655322
GAUSS_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3)),
    4: (np.array([[1 - 2 * _A4, _A4, _A4], [_A4, 1 - 2 * _A4, _A4], [_A4, _A4, 1 - 2 * _A4],
                  [1 - 2 * _B4, _B4, _B4], [_B4, 1 - 2 * _B4, _B4], [_B4, _B4, 1 - 2 * _B4]]),
        np.array([_W4A] * 3 + [_W4B] * 3)),
}

BOUNDARY_TAGS = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class Quadrature:
    """Element Gauss points flattened element-major: point ``q`` lies in
    element ``element[q]``."""

    points: np.ndarray        # (nq, 2)
    weights: np.ndarray       # (nq,) includes the element area
    element: np.ndarray       # (nq,)
    shape: np.ndarray         # (n_per_element, 3) P1 shape values
    n_per_element: int

    def element_sum(self, values):
        """Sum per-point values (already weighted) within each element."""
        v = np.asarray(values)
        return v.reshape((-1, self.n_per_element) + v.shape[1:]).sum(axis=1)

    def integrate(self, values):
        v = np.asarray(values)
        return np.tensordot(self.weights, v, axes=(0, 0))


@dataclass(frozen=True)
class Mesh:
    Lx: float
    Ly: float
    nx: int
    ny: int
    nodes: np.ndarray             # (N, 2)
    triangles: np.ndarray         # (E, 3), counter-clockwise
    boundary_edges: np.ndarray    # (B, 2)
    boundary_tags: np.ndarray     # (B,) indices into BOUNDARY_TAGS
    areas: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)   # (E, 3, 2) shape-function gradients

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.triangles)

    @property
    def measure(self) -> float:
        return self.Lx * self.Ly

    @property
    def h(self) -> float:
        return max(self.Lx / self.nx, self.Ly / self.ny)

    @property
    def boundary_nodes(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_nodes)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def quadrature(self, order: int = 4) -> Quadrature:
        return _quadrature(self, order)

    def contains(self, points, tol=1e-12) -> np.ndarray:
        p = np.atleast_2d(points)
        return ((p[:, 0] >= -tol) & (p[:, 0] <= self.Lx + tol)
                & (p[:, 1] >= -tol) & (p[:, 1] <= self.Ly + tol))

    def locate(self, points):
        """Element index and barycentric coordinates of each point."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if not np.all(self.contains(p)):
            bad = p[~self.contains(p)][0]
            raise DomainError(f"point {tuple(bad)} lies outside [0,{self.Lx}]x[0,{self.Ly}]")
        hx, hy = self.Lx / self.nx, self.Ly / self.ny
        i = np.clip(np.floor(p[:, 0] / hx).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(p[:, 1] / hy).astype(int), 0, self.ny - 1)
        s = p[:, 0] / hx - i
        t = p[:, 1] / hy - j
        upper = t > s
        elem = 2 * (j * self.nx + i) + upper
        verts = self.nodes[self.triangles[elem]]
        bary = _barycentric(verts, p)
        return elem, bary

    def interpolate(self, nodal, points):
        """Evaluate a P1 nodal field (scalar or trailing-shaped) at points."""
        elem, bary = self.locate(points)
        vals = np.asarray(nodal)[self.triangles[elem]]
        return np.einsum("pa,pa...->p...", bary, vals)


def _barycentric(verts, p):
    a, b, c = verts[:, 0], verts[:, 1], verts[:, 2]
    v0, v1, v2 = b - a, c - a, p - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
    return np.stack([1 - l1 - l2, l1, l2], axis=1)


def build_mesh(Lx: float, Ly: float, nx: int, ny: int) -> Mesh:
    """Structured right-triangle mesh of ``[0,Lx] x [0,Ly]`` with ``2*nx*ny``
    elements."""
    errors = []
    if not (Lx > 0 and Ly > 0):
        errors.append(f"extents must be positive, got Lx={Lx}, Ly={Ly}")
    if int(nx) != nx or int(ny) != ny or nx < 2 or ny < 2:
        errors.append(f"resolution must be integers >= 2, got nx={nx}, ny={ny}")
    if errors:
        raise ConfigError("; ".join(errors))
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, Lx, nx + 1)
    ys = np.linspace(0.0, Ly, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i + j * (nx + 1)

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    n00, n10, n11, n01 = nid(ii, jj), nid(ii + 1, jj), nid(ii + 1, jj + 1), nid(ii, jj + 1)
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([n00, n10, n11])
    tris[1::2] = np.column_stack([n00, n11, n01])

    edges, tags = [], []
    for i in range(nx):
        edges.append((nid(i, 0), nid(i + 1, 0)))
        tags.append(0)
    for j in range(ny):
        edges.append((nid(nx, j), nid(nx, j + 1)))
        tags.append(1)
    for i in range(nx, 0, -1):
        edges.append((nid(i, ny), nid(i - 1, ny)))
        tags.append(2)
    for j in range(ny, 0, -1):
        edges.append((nid(0, j), nid(0, j - 1)))
        tags.append(3)

    verts = nodes[tris]
    e1 = verts[:, 1] - verts[:, 0]
    e2 = verts[:, 2] - verts[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = 0.5 * det
    # gradients of the barycentric coordinates
    inv = np.empty((len(tris), 2, 2))
    inv[:, 0, 0], inv[:, 0, 1] = e2[:, 1] / det, -e2[:, 0] / det
    inv[:, 1, 0], inv[:, 1, 1] = -e1[:, 1] / det, e1[:, 0] / det
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = np.einsum("ar,erd->ead", ref, inv)
    return Mesh(float(Lx), float(Ly), nx, ny, nodes, tris,
                np.array(edges, dtype=np.int64), np.array(tags), areas, grads)


_QUAD_CACHE: dict = {}


def _quadrature(mesh: Mesh, order: int) -> Quadrature:
    key = (id(mesh), order)
    hit = _QUAD_CACHE.get(key)
    if hit is not None and hit[0] is mesh:
        return hit[1]
    if order not in GAUSS_RULES:
        raise ConfigError(f"no Gauss rule of order {order}; available {sorted(GAUSS_RULES)}")
    bary, w = GAUSS_RULES[order]
    nqe = len(w)
    verts = mesh.nodes[mesh.triangles]                      # (E,3,2)
    pts = np.einsum("qa,ead->eqd", bary, verts).reshape(-1, 2)
    weights = (mesh.areas[:, None] * w[None, :]).ravel()
    elem = np.repeat(np.arange(mesh.n_elements), nqe)
    quad = Quadrature(pts, weights, elem, bary, nqe)
    _QUAD_CACHE[key] = (mesh, quad)
    return quad


def interpolation_matrix(mesh: Mesh, quad: Quadrature) -> sp.csr_matrix:
    """Sparse map from nodal P1 values to values at the quadrature points."""
    nqe = quad.n_per_element
    rows = np.repeat(np.arange(len(quad.weights)), 3)
    cols = np.repeat(mesh.triangles, nqe, axis=0).ravel()
    vals = np.tile(quad.shape, (mesh.n_elements, 1)).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(quad.weights), mesh.n_nodes))


def _assemble(mesh: Mesh, local, ndof_per_node=1):
    """Scatter element matrices ``local`` (E, 3d, 3d) into a global CSR."""
    d = ndof_per_node
    dofs = (mesh.triangles[:, :, None] * d + np.arange(d)[None, None, :]).reshape(len(local), -1)
    n = dofs.shape[1]
    rows = np.repeat(dofs, n, axis=1).ravel()
    cols = np.tile(dofs, (1, n)).ravel()
    size = mesh.n_nodes * d
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(size, size))


def scalar_stiffness(mesh: Mesh) -> sp.csr_matrix:
    local = mesh.areas[:, None, None] * np.einsum("ead,ebd->eab", mesh.grads, mesh.grads)
    return _assemble(mesh, local)


def scalar_mass(mesh: Mesh, lumped: bool = False) -> sp.csr_matrix:
    if lumped:
        m = np.zeros(mesh.n_nodes)
        np.add.at(m, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
        return sp.diags(m).tocsr()
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _assemble(mesh, mesh.areas[:, None, None] * ref[None])


def vector_mass(mesh: Mesh) -> sp.csr_matrix:
    return sp.kron(scalar_mass(mesh), sp.identity(2), format="csr")


def strain_dof_tensors(mesh: Mesh) -> np.ndarray:
    """Plane-strain tensors ``eps(N_a e_i)`` per element, shape (E, 6, 3, 3),
    ordered (a=0,i=0), (a=0,i=1), (a=1,i=0), ..."""
    E = mesh.n_elements
    out = np.zeros((E, 3, 2, 3, 3))
    for i in range(2):
        for j in range(2):
            # eps_ij of N_a e_c = 0.5 (delta_ic dN_a/dx_j + delta_jc dN_a/dx_i)
            for c in range(2):
                val = 0.5 * ((i == c) * mesh.grads[:, :, j] + (j == c) * mesh.grads[:, :, i])
                out[:, :, c, i, j] += val
    return out.reshape(E, 6, 3, 3)


def elasticity_stiffness(mesh: Mesh, D) -> sp.csr_matrix:
    """Stiffness of ``-div D eps(.)`` for P1 vector fields, dofs node-major."""
    B = strain_dof_tensors(mesh)
    DB = np.swapaxes(D.apply(np.swapaxes(B, 0, 1)), 0, 1)
    local = mesh.areas[:, None, None] * np.einsum("eaij,ebij->eab", DB, B)
    return _assemble(mesh, local, ndof_per_node=2)


def element_strain(mesh: Mesh, u) -> np.ndarray:
    """Constant plane-strain tensor per element of a nodal displacement (N,2)."""
    u = np.asarray(u, dtype=float).reshape(mesh.n_nodes, 2)
    g = np.einsum("eai,ead->eid", u[mesh.triangles], mesh.grads)   # du_i/dx_d
    eps = np.zeros((mesh.n_elements, 3, 3))
    eps[:, :2, :2] = 0.5 * (g + np.swapaxes(g, 1, 2))
    return eps


def element_gradient(mesh: Mesh, theta) -> np.ndarray:
    """Constant gradient per element of a nodal scalar field, shape (E, 2)
    (or (E, 2, ...) for trailing axes)."""
    theta = np.asarray(theta, dtype=float)
    return np.einsum("ea...,ead->ed...", theta[mesh.triangles], mesh.grads)


def load_vector(mesh: Mesh, quad: Quadrature, values) -> np.ndarray:
    """``b_i = int f phi_i`` from values of f at the quadrature points.

    ``values`` may carry trailing axes (e.g. vector loads of shape (nq, 2)).
    """
    values = np.asarray(values, dtype=float)
    phi = np.tile(quad.shape, (mesh.n_elements, 1))             # (nq, 3)
    contrib = (quad.weights[:, None] * phi).reshape(mesh.n_elements, quad.n_per_element, 3)
    vals = values.reshape((mesh.n_elements, quad.n_per_element) + values.shape[1:])
    local = np.einsum("eqa,eq...->ea...", contrib, vals)
    out = np.zeros((mesh.n_nodes,) + values.shape[1:])
    np.add.at(out, mesh.triangles.ravel(), local.reshape((-1,) + values.shape[1:]))
    return out


def boundary_load(mesh: Mesh, func, npts: int = 3) -> np.ndarray:
    """``b_i = int_{boundary} g phi_i ds`` for ``g = func(x, y, normal)``.

    ``func`` receives coordinate arrays and the outward unit normals.
    """
    xg, wg = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    tangent = (b - a) / length[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])   # ccw boundary -> outward
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    nrm = np.repeat(normal[:, None, :], npts, axis=1)
    g = np.asarray(func(pts[..., 0], pts[..., 1], nrm), dtype=float)
    g = np.broadcast_to(g, pts.shape[:2])
    w = length[:, None] * wg[None, :] * g
    out = np.zeros(mesh.n_nodes)
    np.add.at(out, mesh.boundary_edges[:, 0], (w * (1 - s)[None, :]).sum(axis=1))
    np.add.at(out, mesh.boundary_edges[:, 1], (w * s[None, :]).sum(axis=1))
    return out


def boundary_l2_norm(mesh: Mesh, func, npts: int = 3) -> float:
    xg, wg = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (xg + 1.0)
    wg = 0.5 * wg
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    tangent = (b - a) / length[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    nrm = np.repeat(normal[:, None, :], npts, axis=1)
    g = np.broadcast_to(np.asarray(func(pts[..., 0], pts[..., 1], nrm), dtype=float), pts.shape[:2])
    return float(np.sqrt(np.sum(length[:, None] * wg[None, :] * g ** 2)))
