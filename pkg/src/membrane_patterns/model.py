"""Model parameters, simulation state and the assembled operator bundle."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError
from .linalg import BlockSaddleMatrix
from .mesh import (Circulant, SparseMatrix, TorusMesh, assemble_mass, assemble_stiffness,
                   check_spd_2x2)
from .potentials import PotentialSpec, membrane_potential


def _check_coupling(L):
    L = np.asarray(L, dtype=np.float64)
    if L.shape != (2, 2) or not np.all(np.isfinite(L)):
        raise InvalidParameterError("L must be a finite 2x2 matrix")
    if L[0, 1] != L[1, 0]:
        raise InvalidParameterError("L must be symmetric")
    # L = 0 (no coupling) is admitted as a limiting case
    if np.linalg.eigvalsh(L).min() < 0.0:
        raise InvalidParameterError("L must be positive semidefinite")
    return L


@dataclass(frozen=True)
class ModelParams:
    eps: float
    kappa: float
    tau: float
    G: np.ndarray = field(default_factory=lambda: np.eye(2))
    L: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    potential: PotentialSpec = field(default_factory=membrane_potential)

    def __post_init__(self):
        for name in ("eps", "kappa", "tau"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        object.__setattr__(self, "G", check_spd_2x2(self.G, "G"))
        object.__setattr__(self, "L", _check_coupling(self.L))

    @classmethod
    def isotropic(cls, eps, kappa, tau, sigma, lam, potential=None):
        if not sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        if lam < 0:
            raise InvalidParameterError("Lambda must be nonnegative")
        return cls(eps=eps, kappa=kappa, tau=tau, G=sigma * np.eye(2), L=lam * np.eye(2),
                   potential=potential or membrane_potential())

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    # eigenvalue bounds of G and L
    @property
    def G_min(self):
        return float(np.linalg.eigvalsh(self.G)[0])

    @property
    def G_max(self):
        return float(np.linalg.eigvalsh(self.G)[-1])

    @property
    def L_min(self):
        return float(np.linalg.eigvalsh(self.L)[0])

    @property
    def L_max(self):
        return float(np.linalg.eigvalsh(self.L)[-1])


@dataclass
class SimState:
    u: np.ndarray
    mu: np.ndarray
    h: np.ndarray
    g: np.ndarray
    step: int = 0
    time: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.u.copy(), self.mu.copy(), self.h.copy(), self.g.copy(),
                        self.step, self.time)


class Operators:
    """Every matrix the scheme needs for one mesh and parameter set.

    ``M`` consistent mass, ``ml`` lumped mass diagonal, ``K`` Laplace
    stiffness, ``KG``/``KL`` the stiffness matrices weighted by ``G`` and
    ``L``, plus their Fourier symbols and the height saddle operator.
    """

    def __init__(self, mesh: TorusMesh, params: ModelParams):
        self.mesh = mesh
        self.params = params
        self.M = assemble_mass(mesh)
        self.ml = assemble_mass(mesh, lumped=True).diagonal()
        self.K = assemble_stiffness(mesh)
        self.KG = assemble_stiffness(mesh, params.G)
        if np.any(params.L):
            self.KL = _stiffness_psd(mesh, params.L, self.K)
        else:
            self.KL = self.K.scaled(0.0)
        self.fM = Circulant.from_matrix(mesh, self.M)
        self.fK = Circulant.from_matrix(mesh, self.K)
        self.fKG = Circulant.from_matrix(mesh, self.KG)
        self.fKL = Circulant.from_matrix(mesh, self.KL)

        tau, kappa = params.tau, params.kappa
        A = _combine(self.M, 1.0 / tau, self.KG, 1.0)
        self.saddle = BlockSaddleMatrix(A, self.K.scaled(kappa), self.M.scaled(kappa))
        self.fA = Circulant(mesh.n, self.fM.symbol / tau + self.fKG.symbol)
        self.saddle_abs_inv = _abs_inverse_2x2(self.fA.symbol, kappa * self.fK.symbol,
                                               -kappa * self.fM.symbol)

    @property
    def N(self) -> int:
        return self.mesh.vertex_count

    def mass_of(self, v) -> float:
        """Discrete integral ``<v, 1>_h``."""
        return float(self.ml @ v)


def _combine(A: SparseMatrix, a, B: SparseMatrix, b) -> SparseMatrix:
    return SparseMatrix.from_scipy(a * A.to_scipy() + b * B.to_scipy(), symmetric=True)


def _stiffness_psd(mesh, L, K):
    # assemble_stiffness insists on SPD; use linearity in the coefficient for singular L
    if np.linalg.eigvalsh(L).min() > 0.0:
        return assemble_stiffness(mesh, L)
    return _combine(assemble_stiffness(mesh, L + np.eye(2)), 1.0, K, -1.0)


def _abs_inverse_2x2(a, b, d):
    """Entries of ``|X|^{-1}`` for the symmetric per-mode blocks ``X = [[a, b], [b, d]]``.

    ``|X| = sqrt(X^2)`` is positive definite whenever ``X`` is nonsingular.
    """
    det = a * d - b * b
    y11, y12, y22 = a * a + b * b, b * (a + d), b * b + d * d
    root = np.abs(det)
    scale = np.sqrt(y11 + y22 + 2.0 * root)
    p11, p12, p22 = (y11 + root) / scale, y12 / scale, (y22 + root) / scale
    pdet = p11 * p22 - p12 * p12
    return p22 / pdet, -p12 / pdet, p11 / pdet
