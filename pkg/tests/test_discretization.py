import numpy as np
import pytest

from thermovisco import discretization as dz
from thermovisco import mesh as fem
from thermovisco import tensors
from thermovisco.errors import ConfigError, InputError


def test_gram_invariants(bases16):
    rep = bases16.check(1e-8)
    assert rep["mu_first"] == 0.0


def test_neumann_eigenvalues_converge_at_second_order():
    # unit square Neumann spectrum: pi^2 (i^2 + j^2); first nonzero pair pi^2, (1,1) at 2 pi^2
    errs = []
    for n in (8, 16, 32):
        m = fem.build_mesh(1.0, 1.0, n, n)
        _, mu = dz.neumann_eigenbasis(m, 4)
        errs.append(abs(mu[3] - 2 * np.pi ** 2) / (2 * np.pi ** 2))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2.0) <= 0.3), rates


def test_neumann_modes_are_stiffness_orthogonal(mesh16):
    V, mu = dz.neumann_eigenbasis(mesh16, 6)
    K = fem.scalar_stiffness(mesh16)
    np.testing.assert_allclose(V.T @ K @ V, np.diag(mu), atol=1e-9 * mu.max())
    assert np.all(np.diff(mu) >= -1e-12)


def test_eigenvectors_sign_rule(bases16):
    for j in range(1, bases16.l):
        v = bases16.V[:, j]
        assert v[np.argmax(np.abs(v))] > 0


def test_elastic_modes_vanish_on_boundary(bases16):
    b = bases16.mesh.boundary_nodes
    assert np.all(bases16.W[b] == 0.0)


def test_complement_modes_are_plane_and_d_orthogonal_to_strains(bases16):
    z = bases16.zeta
    np.testing.assert_array_equal(z, np.swapaxes(z, -1, -2))
    assert np.abs(z[..., 0, 2]).max() == 0 and np.abs(z[..., 1, 2]).max() == 0
    cross = np.einsum("e,neij,meij->nm", bases16.mesh.areas, bases16.D_zeta, bases16.eps_w)
    assert np.abs(cross).max() < 1e-8


def test_projection_of_basis_combination_is_exact(bases16, rng):
    g = rng.standard_normal(bases16.k)
    d = rng.standard_normal(bases16.l)
    field = dz.reconstruct_strain(g, d, bases16)
    g2, d2 = dz.project_strain(field, bases16)
    np.testing.assert_allclose(g2, g, atol=1e-9)
    np.testing.assert_allclose(d2, d, atol=1e-9)
    b = rng.standard_normal(bases16.l)
    np.testing.assert_allclose(dz.project_scalar(dz.reconstruct_scalar(b, bases16), bases16), b, atol=1e-10)


def test_full_tensor_matches_isotropic(mesh8, rng):
    lam, mu = 1.3, 0.7
    I = np.eye(3)
    full = (lam * np.einsum("ij,kl->ijkl", I, I)
            + mu * (np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I)))
    Df = dz.ElasticityTensor(full=np.broadcast_to(full, (mesh8.n_elements,) + full.shape))
    Di = dz.ElasticityTensor.isotropic(mesh8, lam, mu)
    xi = tensors.sym(rng.standard_normal((mesh8.n_elements, 3, 3)))
    np.testing.assert_allclose(Df.apply(xi), Di.apply(xi), atol=1e-12)
    assert np.isclose(Df.coercivity(), Di.coercivity())


def test_elasticity_validation(mesh8):
    bad = np.zeros((mesh8.n_elements, 3, 3, 3, 3))
    bad[:, 0, 1, 0, 0] = 1.0
    with pytest.raises(InputError):
        dz.ElasticityTensor(full=bad)
    with pytest.raises(InputError):
        dz.ElasticityTensor.isotropic(mesh8, 1.0, -1.0)


def test_dimension_limits(mesh8):
    D = dz.ElasticityTensor.isotropic(mesh8, 1.0, 1.0)
    with pytest.raises(ConfigError):
        dz.neumann_eigenbasis(mesh8, mesh8.n_nodes)
    with pytest.raises(ConfigError):
        dz.elastostatic_eigenbasis(mesh8, D, 2 * 49 + 1)


def test_full_complement_span_on_tiny_mesh():
    m = fem.build_mesh(1.0, 1.0, 2, 2)
    D = dz.ElasticityTensor.isotropic(m, 1.0, 1.0)
    W, lam, eps = dz.elastostatic_eigenbasis(m, D, 2)
    z = dz.complement_basis(m, D, eps, lam, 4 * m.n_elements - 2)
    assert z.shape[0] == 30
    with pytest.raises(ConfigError):
        dz.complement_basis(m, D, eps, lam, 4 * m.n_elements - 1)
