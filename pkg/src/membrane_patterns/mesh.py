"""Periodic Friedrichs-Keller triangulation of the unit torus and P1 assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.sparse as sp

from . import kernels
from .errors import InvalidMeshError, InvalidParameterError

_P1_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


@dataclass(frozen=True)
class TorusMesh:
    """Uniform periodic mesh with ``n x n`` vertices.

    Vertex ``(i, j)`` sits at ``(i/n, j/n)`` and has index ``i + n*j``, so a
    nodal array reshaped to ``(n, n)`` is indexed ``[j, i]``. Every square cell
    is cut along its lower-left to upper-right diagonal.
    """

    n: int
    triangles: np.ndarray = field(repr=False)
    local_xy: np.ndarray = field(repr=False)

    @property
    def hx(self) -> float:
        return 1.0 / self.n

    @property
    def vertex_count(self) -> int:
        return self.n * self.n

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def vertex_ij(self, index):
        index = np.asarray(index)
        return index % self.n, index // self.n

    def vertex_index(self, i, j):
        return np.mod(i, self.n) + self.n * np.mod(j, self.n)

    @property
    def coordinates(self) -> np.ndarray:
        i, j = self.vertex_ij(np.arange(self.vertex_count))
        return np.column_stack([i, j]) * self.hx

    def triangle_areas(self) -> np.ndarray:
        e1 = self.local_xy[:, 1] - self.local_xy[:, 0]
        e2 = self.local_xy[:, 2] - self.local_xy[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def as_grid(self, values) -> np.ndarray:
        return np.asarray(values).reshape(self.n, self.n)


def build_torus_mesh(n: int) -> TorusMesh:
    if int(n) != n or n < 4:
        raise InvalidMeshError(f"need at least 4 vertices per side, got n={n}")
    n = int(n)
    h = 1.0 / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = i + n * j
    v10 = (i + 1) % n + n * j
    v11 = (i + 1) % n + n * ((j + 1) % n)
    v01 = i + n * ((j + 1) % n)
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    # unwrapped corner coordinates, so periodic cells keep their true shape
    x0, y0 = i * h, j * h
    local = np.empty((2 * n * n, 3, 2))
    local[0::2, 0] = np.column_stack([x0, y0])
    local[0::2, 1] = np.column_stack([x0 + h, y0])
    local[0::2, 2] = np.column_stack([x0 + h, y0 + h])
    local[1::2, 0] = np.column_stack([x0, y0])
    local[1::2, 1] = np.column_stack([x0 + h, y0 + h])
    local[1::2, 2] = np.column_stack([x0, y0 + h])
    triangles.flags.writeable = False
    local.flags.writeable = False
    return TorusMesh(n=n, triangles=triangles, local_xy=local)


@dataclass(frozen=True)
class SparseMatrix:
    """Square matrix in compressed row storage."""

    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)
    dim: int
    symmetric: bool = False

    @classmethod
    def from_scipy(cls, mat, symmetric=False) -> "SparseMatrix":
        mat = sp.csr_matrix(mat)
        mat.sum_duplicates()
        mat.sort_indices()
        if mat.shape[0] != mat.shape[1]:
            raise ValueError("SparseMatrix must be square")
        return cls(mat.indptr.astype(np.int64), mat.indices.astype(np.int64),
                   mat.data.astype(np.float64), mat.shape[0], symmetric)

    @property
    def shape(self):
        return (self.dim, self.dim)

    @property
    def nnz(self) -> int:
        return self.data.shape[0]

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: matrix {self.dim}, vector {x.shape}")
        return kernels.K.csr_matvec(self.indptr, self.indices, self.data, x)

    __matmul__ = matvec

    def __call__(self, x):
        return self.matvec(x)

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def scaled(self, a: float) -> "SparseMatrix":
        return SparseMatrix(self.indptr, self.indices, a * self.data, self.dim, self.symmetric)

    def symmetry_defect(self) -> float:
        """Largest ``|A_ij - A_ji|`` relative to the largest entry."""
        s = self.to_scipy()
        scale = np.abs(self.data).max() if self.nnz else 1.0
        return float(abs(s - s.T).max() / scale) if self.nnz else 0.0


def _assemble(mesh, local):
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.vertex_count,) * 2)
    return SparseMatrix.from_scipy(mat, symmetric=True)


def assemble_mass(mesh: TorusMesh, lumped: bool = False) -> SparseMatrix:
    """Consistent P1 mass matrix, or its row-sum lumped diagonal."""
    local = mesh.triangle_areas()[:, None, None] * _P1_MASS_REF[None]
    M = _assemble(mesh, local)
    if not lumped:
        return M
    row_sums = M.to_scipy().sum(axis=1).A1
    return SparseMatrix.from_scipy(sp.diags(row_sums), symmetric=True)


def check_spd_2x2(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (2, 2) or not np.all(np.isfinite(A)):
        raise InvalidParameterError(f"{name} must be a finite 2x2 matrix")
    if A[0, 1] != A[1, 0]:
        raise InvalidParameterError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(A).min() <= 0.0:
        raise InvalidParameterError(f"{name} must be positive definite")
    return A


def assemble_stiffness(mesh: TorusMesh, A=None) -> SparseMatrix:
    """P1 matrix of the form ``<A grad u, grad v>`` for a constant SPD ``A``."""
    A = np.eye(2) if A is None else check_spd_2x2(A)
    local = kernels.K.p1_local_matrices(mesh.local_xy, A)
    return _assemble(mesh, local)


class Circulant:
    """Fourier diagonalisation of a translation-invariant operator on the mesh.

    On the uniform periodic mesh every constant-coefficient P1 matrix is
    block-circulant, so it acts as a pointwise multiplication by its
    ``symbol`` after a 2D real FFT of the nodal grid.
    """

    def __init__(self, n: int, symbol: np.ndarray):
        self.n = n
        self.symbol = symbol

    @classmethod
    def from_matrix(cls, mesh: TorusMesh, mat: SparseMatrix) -> "Circulant":
        e0 = np.zeros(mesh.vertex_count)
        e0[0] = 1.0
        column = mat.to_scipy() @ e0
        symbol = scipy.fft.rfft2(column.reshape(mesh.n, mesh.n))
        # symmetric translation-invariant stencils have real symbols
        return cls(mesh.n, symbol.real.copy())

    def forward(self, x):
        return scipy.fft.rfft2(np.asarray(x).reshape(self.n, self.n))

    def backward(self, xh):
        return scipy.fft.irfft2(xh, s=(self.n, self.n)).ravel()

    def apply(self, x):
        return self.backward(self.symbol * self.forward(x))

    def solve(self, x, zero_mode=0.0):
        """Apply the inverse; the constant mode is set to ``zero_mode`` (used for singular symbols)."""
        xh = self.forward(x)
        sym = self.symbol.copy()
        singular = sym[0, 0] == 0.0 or abs(sym[0, 0]) < 1e-14 * np.abs(sym).max()
        if singular:
            sym[0, 0] = 1.0
        out = xh / sym
        if singular:
            out[0, 0] = zero_mode * self.n * self.n
        return self.backward(out)
