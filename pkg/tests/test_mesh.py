import numpy as np
import pytest

from membrane_patterns.errors import InvalidMeshError, InvalidParameterError
from membrane_patterns.mesh import (Circulant, SparseMatrix, assemble_mass, assemble_stiffness,
                                    build_torus_mesh)


def test_full_resolution_counts():
    mesh = build_torus_mesh(160)
    assert mesh.vertex_count == 25600
    assert mesh.triangle_count == 51200


def test_smallest_mesh_every_vertex_in_six_triangles():
    mesh = build_torus_mesh(4)
    assert (mesh.vertex_count, mesh.triangle_count) == (16, 32)
    assert np.all(np.bincount(mesh.triangles.ravel(), minlength=16) == 6)


@pytest.mark.parametrize("n", [3, 0, -2])
def test_too_small_mesh_rejected(n):
    with pytest.raises(InvalidMeshError):
        build_torus_mesh(n)


@pytest.mark.parametrize("n", [4, 7, 16])
def test_edges_shared_by_two_triangles(n):
    mesh = build_torus_mesh(n)
    edges = np.sort(mesh.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)


def test_areas_and_orientation():
    mesh = build_torus_mesh(8)
    assert np.allclose(mesh.triangle_areas(), 0.5 / 64, rtol=0, atol=1e-15)
    assert mesh.triangle_areas().sum() == pytest.approx(1.0, abs=1e-14)
    # every cell is split along the lower-left to upper-right diagonal
    lower = mesh.local_xy[0::2]
    diag = lower[:, 2] - lower[:, 0]
    assert np.allclose(diag, 1.0 / 8)


def test_vertex_numbering_row_major():
    mesh = build_torus_mesh(5)
    i, j = mesh.vertex_ij(np.arange(25))
    assert np.array_equal(mesh.vertex_index(i, j), np.arange(25))
    assert np.allclose(mesh.coordinates[7], [2 / 5, 1 / 5])


@pytest.mark.parametrize("n", [4, 9, 16])
def test_mass_matrices(n, flavour):
    mesh = build_torus_mesh(n)
    M = assemble_mass(mesh)
    ML = assemble_mass(mesh, lumped=True)
    h2 = (1.0 / n) ** 2
    assert M.data.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(ML.diagonal(), h2, rtol=1e-14)
    dense = M.toarray()
    assert np.allclose(np.diag(dense), h2 / 2, rtol=1e-13)
    off = dense[0][dense[0] != 0.0]
    assert np.sort(off)[:6] == pytest.approx([h2 / 12] * 6, rel=1e-13)
    assert M.symmetry_defect() <= 1e-14


def test_mass_quadratic_form_matches_exact_quadrature(rng):
    mesh = build_torus_mesh(8)
    M = assemble_mass(mesh)
    for _ in range(20):
        u = rng.normal(size=64)
        # exact integral of a squared linear function over a triangle
        ut = u[mesh.triangles]
        exact = (mesh.triangle_areas() / 6.0 * ((ut**2).sum(1) + ut[:, 0] * ut[:, 1]
                                                + ut[:, 1] * ut[:, 2] + ut[:, 0] * ut[:, 2])).sum()
        assert u @ M.matvec(u) == pytest.approx(exact, rel=1e-13)


def test_stiffness_stencil(flavour):
    mesh = build_torus_mesh(4)
    K = assemble_stiffness(mesh).toarray()
    # vertex 5 = (1, 1); axis neighbours 4, 6, 1, 9; diagonal ones 0, 10, 2, 8
    assert K[5, 5] == pytest.approx(4.0)
    for q in (4, 6, 1, 9):
        assert K[5, q] == pytest.approx(-1.0)
    for q in (0, 10, 2, 8):
        assert K[5, q] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(K.sum(axis=1), 0.0, atol=1e-14)


@pytest.mark.parametrize("n", [4, 8, 16])
def test_stiffness_semidefinite_with_constant_kernel(n, rng):
    mesh = build_torus_mesh(n)
    A = np.array([[2.0, 0.3], [0.3, 0.5]])
    K = assemble_stiffness(mesh, A)
    for _ in range(100):
        u = rng.normal(size=n * n)
        assert u @ K.matvec(u) >= -1e-12 * (u @ u)
    c = np.full(n * n, 3.7)
    assert abs(c @ K.matvec(c)) <= 1e-12 * (c @ c)
    dense = K.toarray()
    eig = np.linalg.eigvalsh(dense)
    assert eig[0] == pytest.approx(0.0, abs=1e-12)
    assert eig[1] > 1e-3


@pytest.mark.parametrize("a", [0.01, 1.0, 10.0])
def test_stiffness_linear_in_coefficient(a):
    mesh = build_torus_mesh(8)
    K1 = assemble_stiffness(mesh).toarray()
    Ka = assemble_stiffness(mesh, a * np.eye(2)).toarray()
    assert np.allclose(Ka, a * K1, rtol=1e-14, atol=1e-14 * a)


@pytest.mark.parametrize("A", [np.array([[1.0, 2.0], [2.0, 1.0]]),
                               np.array([[1.0, 0.1], [0.0, 1.0]]),
                               np.zeros((2, 2))])
def test_stiffness_rejects_bad_coefficient(A):
    with pytest.raises(InvalidParameterError):
        assemble_stiffness(build_torus_mesh(4), A)


def test_stiffness_matches_elementwise_gradient_integral(rng):
    mesh = build_torus_mesh(8)
    K = assemble_stiffness(mesh)
    u = rng.normal(size=64)
    total = 0.0
    for tri, xy in zip(mesh.triangles, mesh.local_xy):
        J = np.array([xy[1] - xy[0], xy[2] - xy[0]])
        grad = np.linalg.solve(J, u[tri[1:]] - u[tri[0]])
        total += 0.5 * abs(np.linalg.det(J)) * grad @ grad
    assert u @ K.matvec(u) == pytest.approx(total, rel=1e-12)


def test_sparse_matrix_checks_dimensions():
    M = assemble_mass(build_torus_mesh(4))
    with pytest.raises(ValueError):
        M.matvec(np.ones(15))
    assert M.shape == (16, 16)
    assert isinstance(M.scaled(2.0), SparseMatrix)


def test_circulant_matches_sparse(rng):
    mesh = build_torus_mesh(6)
    K = assemble_stiffness(mesh)
    f = Circulant.from_matrix(mesh, K)
    x = rng.normal(size=36)
    assert np.allclose(f.apply(x), K.matvec(x), atol=1e-12)
    b = K.matvec(x)
    z = f.solve(b)
    assert np.allclose(z, x - x.mean(), atol=1e-11)
