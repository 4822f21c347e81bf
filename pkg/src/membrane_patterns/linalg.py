"""Krylov and dense solvers for the SPD and saddle-point systems of the scheme.

All Krylov methods accept a :class:`~membrane_patterns.mesh.SparseMatrix`, a
scipy sparse matrix, a dense array, or a plain callable ``x -> A x``.
Convergence is always judged on the true residual ``||b - A x||_2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import PreconditionError, SingularMatrixError
from .mesh import SparseMatrix

TRUE_RESIDUAL_EVERY = 50
# relative zero-sum tolerance for right-hand sides of singular systems
MEAN_TOL = 1e-8


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _as_operator(A, dim=None):
    if isinstance(A, (SparseMatrix, BlockSaddleMatrix)):
        return A.matvec, A.dim
    if hasattr(A, "tocsr"):
        csr = A.tocsr()
        return (lambda x: csr @ x), csr.shape[0]
    if isinstance(A, np.ndarray):
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("operator must be square")
        return (lambda x: A @ x), A.shape[0]
    if callable(A):
        if dim is None:
            raise ValueError("a callable operator needs an explicit dim")
        return A, dim
    raise TypeError(f"unsupported operator type {type(A).__name__}")


def _diagonal_of(A):
    if isinstance(A, SparseMatrix):
        return A.diagonal()
    if isinstance(A, np.ndarray):
        return np.diag(A).copy()
    if hasattr(A, "tocsr"):
        return A.tocsr().diagonal()
    return None


def jacobi(diag) -> Callable:
    inv = 1.0 / np.asarray(diag, dtype=np.float64)
    return lambda r: inv * r


def _has_constant_kernel(A, dim):
    if not isinstance(A, SparseMatrix):
        return False
    k1 = A.matvec(np.ones(dim))
    return np.abs(k1).max() <= 1e-12 * np.abs(A.data).max()


def cg_solve(A, b, tol=1e-10, max_iter=None, preconditioner="jacobi", x0=None,
             project_mean=None, dim=None):
    """Preconditioned conjugate gradients.

    ``project_mean`` handles SPD-on-the-complement operators whose kernel is
    the constants: ``b`` must have zero sum and every iterate is projected to
    zero mean (the solve uses ``P A P`` with ``P`` the mean projection).
    It is switched on automatically for a ``SparseMatrix`` whose
    rows sum to zero.

    Returns ``(x, SolveReport)``; non-convergence is reported, not raised.
    """
    apply, n = _as_operator(A, dim)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"dimension mismatch: operator {n}, rhs {b.shape}")
    if max_iter is None:
        max_iter = 2 * n
    if project_mean is None:
        project_mean = _has_constant_kernel(A, n)

    if project_mean:
        if abs(b.sum()) > MEAN_TOL * max(np.abs(b).sum(), 1e-300):
            raise PreconditionError("right-hand side must have zero mean for a singular operator")
        proj = lambda v: v - v.mean()
        b = proj(b)
        # CG runs on the zero-mean subspace with the compressed operator P A P
        raw_apply = apply
        apply = lambda v: proj(raw_apply(proj(v)))
    else:
        proj = lambda v: v

    if isinstance(preconditioner, str):
        if preconditioner != "jacobi":
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        diag = _diagonal_of(A)
        precond = jacobi(diag) if diag is not None else (lambda r: r)
    elif preconditioner is None:
        precond = lambda r: r
    else:
        precond = preconditioner

    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    target = tol * bnorm

    x = np.zeros(n) if x0 is None else proj(np.array(x0, dtype=np.float64))
    r = b - apply(x) if x0 is not None else b.copy()
    rnorm = np.linalg.norm(r)
    history = [rnorm]
    if rnorm <= target:
        return x, SolveReport(0, rnorm, True, history)

    z = proj(precond(r))
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            # operator not SPD on the search space; stop honestly
            rnorm = np.linalg.norm(b - apply(x))
            return x, SolveReport(it, rnorm, rnorm <= target, history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target or it % TRUE_RESIDUAL_EVERY == 0:
            if project_mean:
                x = proj(x)
            r = b - apply(x)
            rnorm = np.linalg.norm(r)
            history.append(rnorm)
            if rnorm <= target:
                return x, SolveReport(it, rnorm, True, history)
        else:
            history.append(rnorm)
        z = proj(precond(r))
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rnorm = np.linalg.norm(b - apply(x))
    return x, SolveReport(max_iter, rnorm, rnorm <= target, history)


class BlockSaddleMatrix:
    """Symmetric block operator ``[[A, B], [B^T, -C]]`` with square blocks of size ``N``."""

    def __init__(self, A: SparseMatrix, B: SparseMatrix, C: SparseMatrix):
        if not (A.dim == B.dim == C.dim):
            raise ValueError("blocks must share one dimension")
        self.A, self.B, self.C = A, B, C
        self.N = A.dim
        self._BT = B if B.symmetric else SparseMatrix.from_scipy(B.to_scipy().T)

    @property
    def dim(self) -> int:
        return 2 * self.N

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"dimension mismatch: operator {self.dim}, vector {x.shape}")
        u, v = x[:self.N], x[self.N:]
        return np.concatenate([self.A @ u + self.B @ v, self._BT @ u - self.C @ v])

    __matmul__ = matvec

    def toarray(self):
        return np.block([[self.A.toarray(), self.B.toarray()],
                         [self._BT.toarray(), -self.C.toarray()]])

    def default_preconditioner(self):
        inv = np.concatenate([1.0 / self.A.diagonal(), 1.0 / self.C.diagonal()])
        return lambda r: inv * r


def minres_solve(S, rhs, tol=1e-10, max_iter=None, preconditioner="block-jacobi", x0=None, dim=None):
    """Preconditioned MINRES for symmetric (possibly indefinite) systems.

    ``preconditioner`` must be symmetric positive definite: a callable
    ``r -> P^{-1} r``, ``None`` for none, or ``"block-jacobi"`` which uses
    ``[diag(A), diag(C)]`` of a :class:`BlockSaddleMatrix`.
    ``SolveReport.history`` holds the recurrence estimate of the residual in
    the preconditioner norm, which is non-increasing.
    """
    apply, n = _as_operator(S, dim)
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape != (n,):
        raise ValueError(f"dimension mismatch: operator {n}, rhs {rhs.shape}")
    if max_iter is None:
        max_iter = 5 * n
    if isinstance(preconditioner, str):
        if preconditioner != "block-jacobi":
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        precond = S.default_preconditioner() if isinstance(S, BlockSaddleMatrix) else (lambda r: r)
    elif preconditioner is None:
        precond = lambda r: r
    else:
        precond = preconditioner

    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    target = tol * bnorm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r1 = rhs - apply(x) if x0 is not None else rhs.copy()
    true_res = np.linalg.norm(r1)
    if true_res <= target:
        return x, SolveReport(0, true_res, True, [true_res])
    y = precond(r1)
    beta1 = np.sqrt(r1 @ y)
    if not beta1 > 0.0:
        raise PreconditionError("preconditioner is not positive definite")

    # estimate threshold in the preconditioner norm; tightened if the
    # 2-norm lags behind
    est_target = tol * beta1 * (bnorm / true_res if x0 is not None else 1.0)
    oldb, beta, dbar, epsln, phibar = 0.0, beta1, 0.0, 0.0, beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()
    history = [beta1]
    eps = np.finfo(float).eps

    for it in range(1, max_iter + 1):
        v = y / beta
        y = apply(v)
        if it >= 2:
            y = y - (beta / oldb) * r1
        alfa = v @ y
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = precond(r2)
        oldb = beta
        beta = np.sqrt(max(r2 @ y, 0.0))
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        history.append(phibar)

        if phibar <= est_target or it % TRUE_RESIDUAL_EVERY == 0 or beta == 0.0:
            true_res = np.linalg.norm(rhs - apply(x))
            if true_res <= target:
                return x, SolveReport(it, true_res, True, history)
            if phibar <= est_target:
                est_target *= max(min(target / true_res, 0.5), 1e-3)
            if beta == 0.0:
                break
    true_res = np.linalg.norm(rhs - apply(x))
    return x, SolveReport(it, true_res, true_res <= target, history)


MAX_DENSE_DIM = 4096
PIVOT_THRESHOLD = 1e-12


def dense_solve(A, b):
    """LU with partial pivoting; raises :class:`SingularMatrixError` on tiny pivots."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("dense_solve needs a square matrix")
    if A.shape[0] > MAX_DENSE_DIM:
        raise PreconditionError(f"dense_solve limited to dimension {MAX_DENSE_DIM}")
    if b.shape[0] != A.shape[0]:
        raise ValueError("dimension mismatch")
    scale = np.abs(A).max() if A.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    if scale == 0.0 or np.abs(np.diag(lu)).min() < PIVOT_THRESHOLD * scale:
        raise SingularMatrixError("matrix is singular to working precision")
    return scipy.linalg.lu_solve((lu, piv), b)
