"""Slow dense reference solutions for tiny meshes.

Everything here uses dense matrices, a pseudo-inverse for the discrete
inverse Laplacian and first-order descent, so it shares no code with the
FFT/Krylov/Newton path of :mod:`membrane_patterns.scheme`. Only the
assembled FE matrices and the potential evaluations are common, and both
are tested on their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OracleFailure, PreconditionError
from .linalg import dense_solve
from .mesh import TorusMesh, assemble_mass, assemble_stiffness
from .model import ModelParams, SimState

MAX_ORACLE_N = 16
ARMIJO = 1e-4


@dataclass(frozen=True)
class OracleConfig:
    """``n`` is the largest admissible mesh size; ``tol`` bounds the tangent gradient norm."""

    n: int = MAX_ORACLE_N
    tol: float = 1e-11
    max_iter: int = 20000

    def __post_init__(self):
        if not 4 <= self.n <= MAX_ORACLE_N:
            raise PreconditionError(f"oracle mesh size must lie in [4, {MAX_ORACLE_N}]")
        if not self.tol > 0 or self.max_iter < 1:
            raise PreconditionError("oracle tolerance and iteration cap must be positive")

    def check(self, mesh: TorusMesh):
        if mesh.n > self.n:
            raise PreconditionError(f"oracle limited to n <= {self.n}, got n={mesh.n}")


class DenseSystem:
    """Dense copies of the FE matrices plus the pseudo-inverse of the stiffness matrix."""

    def __init__(self, mesh: TorusMesh, params: ModelParams):
        self.M = assemble_mass(mesh).toarray()
        self.ml = assemble_mass(mesh, lumped=True).diagonal()
        self.K = assemble_stiffness(mesh).toarray()
        self.KG = self._stiffness(mesh, params.G)
        self.KL = self._stiffness(mesh, params.L)
        self.Kpinv = np.linalg.pinv(self.K, rcond=1e-12, hermitian=True)
        self.Minv = np.linalg.inv(self.M)
        self.N = mesh.vertex_count

    @staticmethod
    def _stiffness(mesh, A):
        if not np.any(A):
            return np.zeros((mesh.vertex_count,) * 2)
        # linear in the coefficient: K_A = K_{A + c I} - c K_I keeps every assembly SPD
        c = max(0.0, -np.linalg.eigvalsh(A)[0]) + 1.0
        out = assemble_stiffness(mesh, A + c * np.eye(2)).toarray()
        return out - c * assemble_stiffness(mesh).toarray()

    def project(self, v):
        """Euclidean projection onto ``{v : ml . v = 0}``."""
        return v - (self.ml @ v) / (self.ml @ self.ml) * self.ml

    def hminus_sq(self, d):
        Md = self.M @ d
        return float(Md @ self.Kpinv @ Md)


def _pgd(value, grad, x0, project, metric, tol, max_iter, what):
    """Projected variable-metric descent with Armijo backtracking.

    ``metric(x)`` returns a map from gradients to steps (the inverse of an SPD
    metric at ``x``). Stops once the projected gradient has 2-norm at most ``tol``.
    """
    x = x0.copy()
    f = value(x)
    step = 1.0
    for it in range(max_iter):
        g = project(grad(x))
        gnorm = np.linalg.norm(g)
        if gnorm <= tol:
            return x, f, it
        d = -project(metric(x)(g))
        slope = g @ d
        if not slope < 0.0:
            raise OracleFailure(f"{what}: metric step is not a descent direction")
        if -slope <= 1e3 * np.finfo(float).eps * max(abs(f), 1.0):
            # J differences drown in rounding here; the unit metric step is safe
            x = x + d
            f = value(x)
            continue
        t = min(1.0, 2.0 * step)
        while True:
            trial = x + t * d
            f_trial = value(trial)
            if f_trial <= f + ARMIJO * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                raise OracleFailure(f"{what}: line search stalled at gradient norm {gnorm:.3e}")
        x, f, step = trial, f_trial, t
    raise OracleFailure(f"{what}: no convergence in {max_iter} iterations")


def _metric_solver(Q, ml):
    # Q is SPD on the tangent space; bordering with ml makes it invertible
    N = Q.shape[0]
    B = np.zeros((N + 1, N + 1))
    B[:N, :N] = Q
    B[:N, N] = ml
    B[N, :N] = ml
    inv = np.linalg.inv(B)[:N, :N]
    return lambda g: inv @ g


def _convex_metric(A, D: DenseSystem, params: ModelParams):
    """Metric ``A + eps K + diag(ml W1''(x))/eps``, SPD on the mass hyperplane."""
    base = A + params.eps * D.K

    def at(x):
        curv = params.potential.convex(x)[2]
        return _metric_solver(base + np.diag(D.ml * curv) / params.eps, D.ml)
    return at


def minimize_J_direct(u_prev, h_next, params: ModelParams, mesh: TorusMesh,
                      config: OracleConfig | None = None, dense: DenseSystem | None = None):
    """Minimiser of the reduced Cahn-Hilliard functional over the mass hyperplane.

    ``J(u) = |u - u_prev|_{-1}^2/(2 tau) + eps/2 u.K.u
    + sum ml (W1(u) + W2'(u_prev) u)/eps - u.KL.h_next``.
    """
    config = config or OracleConfig()
    config.check(mesh)
    D = dense or DenseSystem(mesh, params)
    u_prev = np.asarray(u_prev, dtype=np.float64)
    h_next = np.asarray(h_next, dtype=np.float64)
    pot, eps, tau = params.potential, params.eps, params.tau
    explicit = pot.concave(u_prev)[1]
    coupling = D.KL @ h_next
    A = D.M @ D.Kpinv @ D.M / tau

    def value(u):
        d = u - u_prev
        return float(0.5 * d @ A @ d + 0.5 * eps * u @ D.K @ u
                     + D.ml @ (pot.convex(u)[0] + explicit * u) / eps - u @ coupling)

    def grad(u):
        return A @ (u - u_prev) + eps * D.K @ u + D.ml * (pot.convex(u)[1] + explicit) / eps - coupling

    u, _, _ = _pgd(value, grad, u_prev, D.project, _convex_metric(A, D, params),
                   config.tol, config.max_iter, "minimize_J_direct")
    return u


@dataclass
class CoupledResult:
    u: np.ndarray
    h: np.ndarray
    value: float
    sweeps: int


def coupled_energy(u, h, params: ModelParams, D: DenseSystem) -> float:
    """Discrete ``F(u, h)`` with the full (unsplit) potential and ``g = M^{-1} K h``."""
    g = D.Minv @ (D.K @ h)
    return float(D.ml @ params.potential.W(u) / params.eps + 0.5 * params.eps * u @ D.K @ u
                 + 0.5 * h @ D.KG @ h + 0.5 * params.kappa * g @ D.M @ g - u @ D.KL @ h)


def minimize_Jn_coupled(u_prev, h_prev, params: ModelParams, mesh: TorusMesh,
                        config: OracleConfig | None = None) -> CoupledResult:
    """Stationary point of the unsplit minimizing-movement functional

    ``J_n(u, h) = |u - u_prev|_{-1}^2/(2 tau) + |h - h_prev|^2/(2 tau) + F(u, h)``

    by alternating descent: exact minimisation in ``h`` (a quadratic), then
    projected descent in ``u`` with the full potential ``W``.
    """
    config = config or OracleConfig()
    config.check(mesh)
    if params.tau > 1e-2:
        raise PreconditionError("minimize_Jn_coupled needs tau <= 1e-2")
    D = DenseSystem(mesh, params)
    u_prev = np.asarray(u_prev, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    pot, eps, tau, kappa = params.potential, params.eps, params.tau, params.kappa
    A = D.M @ D.Kpinv @ D.M / tau
    H = D.M / tau + D.KG + kappa * D.K @ D.Minv @ D.K

    def total(u, h):
        dh = h - h_prev
        return (0.5 * (u - u_prev) @ A @ (u - u_prev) + 0.5 * dh @ D.M @ dh / tau
                + coupled_energy(u, h, params, D))

    def grad_u(u, h):
        return A @ (u - u_prev) + eps * D.K @ u + D.ml * pot.dW(u) / eps - D.KL @ h

    def grad_h(u, h):
        return H @ h - D.M @ h_prev / tau - D.KL @ u

    metric = _convex_metric(A, D, params)

    u, h = u_prev.copy(), h_prev.copy()
    for sweep in range(1, config.max_iter + 1):
        h = dense_solve(H, D.M @ h_prev / tau + D.KL @ u)
        u, _, _ = _pgd(lambda v: total(v, h), lambda v: grad_u(v, h), u, D.project, metric,
                       config.tol, config.max_iter, "minimize_Jn_coupled")
        if (np.linalg.norm(D.project(grad_u(u, h))) <= config.tol
                and np.linalg.norm(grad_h(u, h)) <= config.tol * max(1.0, np.linalg.norm(H @ h))):
            return CoupledResult(u, h, total(u, h), sweep)
    raise OracleFailure(f"minimize_Jn_coupled: no convergence in {config.max_iter} sweeps")


def saddle_dense_matrix(params: ModelParams, mesh: TorusMesh, dense: DenseSystem | None = None):
    """Dense ``[[M/tau + KG, kappa K], [kappa K, -kappa M]]``."""
    D = dense or DenseSystem(mesh, params)
    return np.block([[D.M / params.tau + D.KG, params.kappa * D.K],
                     [params.kappa * D.K, -params.kappa * D.M]])


def saddle_dense_oracle(state: SimState, params: ModelParams, mesh: TorusMesh,
                        config: OracleConfig | None = None, dense: DenseSystem | None = None):
    """Height step by dense LU of the full ``2 n^2`` saddle matrix; returns ``(h, g)``."""
    (config or OracleConfig()).check(mesh)
    D = dense or DenseSystem(mesh, params)
    S = saddle_dense_matrix(params, mesh, D)
    rhs = np.concatenate([D.M @ state.h / params.tau + D.KL @ state.u, np.zeros(D.N)])
    x = dense_solve(S, rhs)
    return x[:D.N], x[D.N:]
