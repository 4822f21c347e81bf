"""One time step of the fully discrete membrane system.

A step first solves the linear height/curvature saddle system for
``(h, g)`` with MINRES, then the nonlinear Cahn-Hilliard pair ``(u, mu)``
by damped Newton on the strictly convex reduced functional ``J`` over the
mass-constraint hyperplane. Potential terms use lumped (nodal) quadrature.

Every matrix lives on a uniform periodic mesh, so all constant-coefficient
operators are circulant. They are applied directly by FFT, and FFT
inverses serve as preconditioners for the Krylov solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StepFailure
from .linalg import cg_solve, minres_solve
from .model import ModelParams, Operators, SimState

NEWTON_TOL = 1e-9
MINRES_TOL = 1e-10
MAX_NEWTON = 50
ARMIJO = 1e-4
STEP_FLOOR = 1e-6


@dataclass
class SolverSettings:
    newton_tol: float = NEWTON_TOL
    minres_tol: float = MINRES_TOL
    max_newton: int = MAX_NEWTON
    newton_cg_tol: float = 1e-10
    max_krylov: int = 2000


@dataclass
class StepStats:
    newton_iters: int = 0
    krylov_outer: int = 0
    krylov_inner: int = 0
    residual_ch: float = np.nan
    residual_height: float = np.nan
    energy_before: float = np.nan
    energy_after: float = np.nan
    backtracks: int = 0
    notes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# height / curvature subsystem
# ---------------------------------------------------------------------------

def height_rhs(state: SimState, params: ModelParams, ops: Operators) -> np.ndarray:
    top = ops.M @ state.h / params.tau + ops.KL @ state.u
    return np.concatenate([top, np.zeros(ops.N)])


def saddle_preconditioner(ops: Operators):
    """``|S|^{-1}`` applied mode by mode in Fourier space.

    Each Fourier mode of the saddle operator is a symmetric 2x2 block; its
    absolute value is SPD and the preconditioned spectrum is exactly +-1.
    """
    N = ops.N
    q11, q12, q22 = ops.saddle_abs_inv
    f = ops.fM

    def apply(r):
        xh, yh = f.forward(r[:N]), f.forward(r[N:])
        return np.concatenate([f.backward(q11 * xh + q12 * yh), f.backward(q12 * xh + q22 * yh)])

    return apply


def height_step(state: SimState, params: ModelParams, ops: Operators,
                settings: SolverSettings | None = None):
    """Solve the linear system for the new height ``h`` and curvature ``g = -Lap h``."""
    settings = settings or SolverSettings()
    stats = StepStats()
    rhs = height_rhs(state, params, ops)
    x, report = minres_solve(ops.saddle, rhs, tol=settings.minres_tol,
                             max_iter=settings.max_krylov,
                             preconditioner=saddle_preconditioner(ops))
    stats.krylov_inner = report.iterations
    stats.residual_height = report.residual
    if not report.converged:
        raise StepFailure(f"MINRES did not converge (residual {report.residual:.3e} "
                          f"after {report.iterations} iterations)", stats)
    return x[:ops.N], x[ops.N:], stats


# ---------------------------------------------------------------------------
# Cahn-Hilliard subsystem
# ---------------------------------------------------------------------------

def _inverse_laplace(ops: Operators, f):
    """Zero-mean ``z`` with ``K z = f`` for zero-sum ``f``."""
    return ops.fK.solve(f, zero_mode=0.0)


class CHProblem:
    """The reduced functional ``J`` of one Cahn-Hilliard step and its derivatives.

    ``J(u) = 1/(2 tau) |u - u_prev|_{-1,h}^2 + eps/2 u.K.u
    + 1/eps sum_i ml_i (W1(u_i) + W2'(u_prev_i) u_i) - u.KL.h_next``
    """

    def __init__(self, u_prev, h_next, params: ModelParams, ops: Operators):
        self.u_prev = np.asarray(u_prev, dtype=np.float64)
        self.h_next = np.asarray(h_next, dtype=np.float64)
        self.params = params
        self.ops = ops
        pot = params.potential
        self.explicit = pot.concave(self.u_prev)[1]
        self.coupling = ops.KL @ self.h_next
        # circulant part of the Hessian: M K^+ M / tau + eps K
        fM, fK = ops.fM.symbol, ops.fK.symbol
        safe_k = np.where(fK == 0.0, 1.0, fK)
        lin = fM * fM / safe_k / params.tau + params.eps * fK
        lin[0, 0] = 0.0
        self.lin_symbol = lin

    def _hminus(self, d):
        return _inverse_laplace(self.ops, self.ops.M @ d)

    def value(self, u) -> float:
        p, ops = self.params, self.ops
        d = u - self.u_prev
        Md = ops.M @ d
        w1 = p.potential.convex(u)[0]
        return float(0.5 / p.tau * (Md @ _inverse_laplace(ops, Md))
                     + 0.5 * p.eps * (u @ (ops.K @ u))
                     + (ops.ml @ (w1 + self.explicit * u)) / p.eps
                     - u @ self.coupling)

    def gradient(self, u) -> np.ndarray:
        p, ops = self.params, self.ops
        d = u - self.u_prev
        dw1 = p.potential.convex(u)[1]
        return (ops.M @ self._hminus(d) / p.tau + p.eps * (ops.K @ u)
                + ops.ml * (dw1 + self.explicit) / p.eps - self.coupling)

    def chemical_potential(self, u) -> np.ndarray:
        """``mu = lagrange - 1/tau (-Lap_h)^{-1}(u - u_prev)``."""
        p, ops = self.params, self.ops
        dw1 = p.potential.convex(u)[1]
        lagrange = (ops.ml @ (dw1 + self.explicit)) / p.eps / ops.ml.sum()
        return lagrange - self._hminus(u - self.u_prev) / p.tau

    def hessian_operator(self, u):
        p, ops = self.params, self.ops
        diag = ops.ml * p.potential.convex(u)[2] / p.eps
        fM = ops.fM

        def apply(v):
            return fM.backward(self.lin_symbol * fM.forward(v)) + diag * v

        shift = diag.mean()
        pre_symbol = self.lin_symbol + shift
        pre_symbol[0, 0] = 1.0

        def precondition(r):
            rh = fM.forward(r) / pre_symbol
            rh[0, 0] = 0.0
            return fM.backward(rh)

        return apply, precondition


def residual_weak_form(u_next, mu_next, h_next, state: SimState, params: ModelParams,
                       ops: Operators):
    """Nodal residuals of the two Cahn-Hilliard equations, lumped potential quadrature.

    ``r1 = M (u_next - u_prev)/tau + K mu_next``
    ``r2 = -M mu_next + eps K u_next + ml (W1'(u_next) + W2'(u_prev))/eps - KL h_next``
    """
    pot = params.potential
    r1 = ops.M @ (u_next - state.u) / params.tau + ops.K @ mu_next
    r2 = (-(ops.M @ mu_next) + params.eps * (ops.K @ u_next)
          + ops.ml * (pot.convex(u_next)[1] + pot.concave(state.u)[1]) / params.eps
          - ops.KL @ h_next)
    return r1, r2


def _residual_norm(r1, r2):
    return float(np.sqrt(r1 @ r1 + r2 @ r2))


def ch_step(state: SimState, h_new, params: ModelParams, ops: Operators,
            settings: SolverSettings | None = None, initial_guess=None):
    """Newton iteration for the new order parameter and chemical potential."""
    settings = settings or SolverSettings()
    stats = StepStats()
    prob = CHProblem(state.u, h_new, params, ops)
    if initial_guess is None:
        u = state.u.copy()
    else:
        u = np.asarray(initial_guess, dtype=np.float64).copy()
        u += state.u.mean() - u.mean()

    J = prob.value(u)
    for it in range(settings.max_newton + 1):
        mu = prob.chemical_potential(u)
        res = _residual_norm(*residual_weak_form(u, mu, h_new, state, params, ops))
        stats.residual_ch = res
        if res <= settings.newton_tol:
            stats.newton_iters = it
            return u, mu, stats
        if it == settings.max_newton:
            break
        grad = prob.gradient(u)
        # second pass removes the rounding left by a large Lagrange component
        grad -= grad.mean()
        grad -= grad.mean()
        apply, precond = prob.hessian_operator(u)
        # inexact Newton: the linear tolerance tracks the current residual
        forcing = min(1e-2, max(res, settings.newton_cg_tol))
        delta, report = cg_solve(apply, -grad, tol=forcing,
                                 max_iter=settings.max_krylov, preconditioner=precond,
                                 project_mean=True, dim=ops.N)
        stats.krylov_outer += report.iterations
        slope = grad @ delta
        if not report.converged and not slope < 0.0:
            raise StepFailure("Newton linear solve failed", stats)
        if slope >= 0.0:
            raise StepFailure("Newton direction is not a descent direction", stats)

        # Armijo backtracking; near the solution J differences drown in
        # rounding, then the full step is taken
        t = 1.0
        if -slope <= 1e3 * np.finfo(float).eps * max(abs(J), 1.0):
            u = u + delta
            J = prob.value(u)
            continue
        while True:
            trial = u + t * delta
            J_trial = prob.value(trial)
            if J_trial <= J + ARMIJO * t * slope:
                break
            t *= 0.5
            stats.backtracks += 1
            if t < STEP_FLOOR:
                raise StepFailure("line search failed", stats)
        u, J = trial, J_trial
    stats.newton_iters = settings.max_newton
    raise StepFailure(f"Newton did not converge in {settings.max_newton} iterations "
                      f"(residual {stats.residual_ch:.3e})", stats)


def advance(state: SimState, params: ModelParams, ops: Operators,
            settings: SolverSettings | None = None):
    """Height step followed by the Cahn-Hilliard step; returns ``(new_state, stats)``."""
    from .diagnostics import discrete_energy

    settings = settings or SolverSettings()
    h_new, g_new, hstats = height_step(state, params, ops, settings)
    try:
        u_new, mu_new, stats = ch_step(state, h_new, params, ops, settings)
    except StepFailure as exc:
        if exc.stats is not None:
            exc.stats.krylov_inner = hstats.krylov_inner
        raise
    stats.krylov_inner = hstats.krylov_inner
    stats.residual_height = hstats.residual_height
    new = SimState(u_new, mu_new, h_new, g_new, state.step + 1, (state.step + 1) * params.tau)
    stats.energy_before = discrete_energy(state, params, ops).e_total
    stats.energy_after = discrete_energy(new, params, ops).e_total
    return new, stats
