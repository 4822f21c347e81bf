"""Energy ledger, discrete negative norm, pattern metrics, dependence probe."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from . import kernels
from .errors import PreconditionError, StepFailure
from .linalg import cg_solve
from .mesh import build_torus_mesh
from .model import ModelParams, Operators, SimState


@dataclass(frozen=True)
class EnergyBreakdown:
    e_potential: float
    e_grad_u: float
    e_surface: float
    e_bend: float
    e_coupling: float
    e_total: float

    def as_dict(self):
        return asdict(self)


def discrete_energy(state: SimState, params: ModelParams, ops: Operators) -> EnergyBreakdown:
    u, h, g = state.u, state.h, state.g
    e_pot = float(ops.ml @ params.potential.W(u)) / params.eps
    e_grad = 0.5 * params.eps * float(u @ (ops.K @ u))
    e_surf = 0.5 * float(h @ (ops.KG @ h))
    e_bend = 0.5 * params.kappa * float(g @ (ops.M @ g))
    e_coup = -float(u @ (ops.KL @ h))
    total = e_pot + e_grad + e_surf + e_bend + e_coup
    return EnergyBreakdown(e_pot, e_grad, e_surf, e_bend, e_coup, total)


def h_minus_one_norm(v, ops: Operators, tol=1e-12) -> float:
    """Discrete ``|v|_{-1} = sqrt(v^T M K^+ M v)`` for zero-mean ``v``."""
    v = np.asarray(v, dtype=np.float64)
    if abs(ops.mass_of(v)) > 1e-10:
        raise PreconditionError("h_minus_one_norm needs a zero-mean argument")
    Mv = ops.M @ v
    Mv -= Mv.mean()
    if not np.any(Mv):
        return 0.0
    # the Fourier inverse of K is an exact preconditioner on this mesh
    z, report = cg_solve(ops.K, Mv, tol=tol, project_mean=True,
                         preconditioner=lambda r: ops.fK.solve(r - r.mean()))
    return float(np.sqrt(max(Mv @ z, 0.0)))


def l2_norm(v, ops: Operators) -> float:
    """Lumped ``L2`` norm of nodal values."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.sqrt(ops.ml @ (v * v)))


# ---------------------------------------------------------------------------
# pattern metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatternThresholds:
    homogeneous_hi: float = 0.95
    homogeneous_lo: float = 0.05
    dots_min_components: int = 5
    dots_max_elongation: float = 2.0
    stripes_min_elongation: float = 3.0
    elongation_cap: float = 10.0


@dataclass(frozen=True)
class PatternMetrics:
    components: int
    area_fraction: float
    elongation: float
    label: str


def _feret_ratio(points, n, cap):
    """Max over min caliper width of a set of grid cells, in cell units.

    ``points`` are unwrapped integer coordinates of the cells. Each cell is a
    unit square, so widths include the cell extent.
    """
    if points.shape[0] == 1:
        return 1.0
    corners = (points[:, None, :] + np.array([[0, 0], [1, 0], [0, 1], [1, 1]])[None]).reshape(-1, 2)
    corners = np.unique(corners, axis=0).astype(np.float64)
    angles = np.linspace(0.0, np.pi, 90, endpoint=False)
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    proj = corners @ dirs.T
    widths = proj.max(axis=0) - proj.min(axis=0)
    return min(widths.max() / widths.min(), cap)


def _unwrap_component(mask_c, n):
    """Unwrap a periodic component by BFS; returns (coords, wraps)."""
    cells = np.argwhere(mask_c)
    start = tuple(cells[0])
    pos = {start: np.array(start)}
    queue = [start]
    wraps = False
    member = set(map(tuple, cells))
    while queue:
        c = queue.pop()
        pc = pos[c]
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            q = ((c[0] + d[0]) % n, (c[1] + d[1]) % n)
            if q not in member:
                continue
            pq = pc + d
            if q in pos:
                if np.any(pos[q] != pq):
                    wraps = True
                continue
            pos[q] = pq
            queue.append(q)
    return np.array(list(pos.values())), wraps


def pattern_metrics(u, threshold=0.0, thresholds: PatternThresholds | None = None) -> PatternMetrics:
    """Classify the sublevel pattern ``{u > threshold}`` on the periodic vertex grid."""
    th = thresholds or PatternThresholds()
    u = np.asarray(u, dtype=np.float64)
    n = int(round(np.sqrt(u.size)))
    if n * n != u.size:
        raise PreconditionError("pattern_metrics needs a square nodal array")
    mask = u.reshape(n, n) > threshold
    area = float(mask.mean())
    labels, count = kernels.K.label_periodic(mask)

    elongations = []
    for c in range(count):
        pts, wraps = _unwrap_component(labels == c, n)
        elongations.append(th.elongation_cap if wraps else _feret_ratio(pts, n, th.elongation_cap))
    elong = float(np.mean(elongations)) if elongations else 0.0

    if count == 0 or (count == 1 and (area > th.homogeneous_hi or area < th.homogeneous_lo)):
        label = "homogeneous"
    elif count >= th.dots_min_components and elong < th.dots_max_elongation:
        label = "dots"
    elif elong >= th.stripes_min_elongation:
        label = "stripes"
    else:
        label = "mixed"
    return PatternMetrics(count, area, elong, label)


def minority_pattern_metrics(u, threshold=0.0, thresholds: PatternThresholds | None = None):
    """``pattern_metrics`` of whichever phase occupies less than half the torus.

    Dots of the minority phase sit in a connected sea of the majority phase,
    so counting components only makes sense on the minority side.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.mean(u > threshold) > 0.5:
        return pattern_metrics(-u, -threshold, thresholds)
    return pattern_metrics(u, threshold, thresholds)


# ---------------------------------------------------------------------------
# continuous dependence on the initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DependenceRow:
    delta: float
    D: float
    ratio: float     # D / delta^2, nan for delta = 0


def perturbation_profile(n: int) -> np.ndarray:
    """Fixed smooth zero-mean nodal profile ``cos(2 pi x) sin(4 pi y)``, max norm 1."""
    idx = np.arange(n * n)
    x, y = (idx % n) / n, (idx // n) / n
    p = np.cos(2 * np.pi * x) * np.sin(4 * np.pi * y)
    return p - p.mean()


def continuous_dependence_probe(config, deltas, profile=None):
    """Distance ``D(delta)`` at ``t_end`` between runs from ``u0`` and ``u0 + delta p``.

    ``D = |du|_{-1}^2 + |dh|_{L2,h}^2``; returns one :class:`DependenceRow`
    per entry of ``deltas``. Simulation failures propagate.
    """
    # the driver imports this module, so it is loaded lazily
    from .driver import init_fields, simulate

    mesh_n = config.n
    p = perturbation_profile(mesh_n) if profile is None else np.asarray(profile, dtype=np.float64)
    base_state = init_fields(config)

    def final(state):
        res = simulate(config, state=state)
        if res.status != "ok":
            raise StepFailure(res.message)
        return res.state

    reference = final(base_state)
    ops = Operators(build_torus_mesh(mesh_n), config.model_params())
    rows = []
    for delta in deltas:
        delta = float(delta)
        if delta == 0.0:
            rows.append(DependenceRow(0.0, 0.0, float("nan")))
            continue
        start = base_state.copy()
        start.u = start.u + delta * p
        other = final(start)
        du = other.u - reference.u
        du -= ops.mass_of(du) / ops.ml.sum()
        dh = other.h - reference.h
        D = h_minus_one_norm(du, ops) ** 2 + l2_norm(dh, ops) ** 2
        rows.append(DependenceRow(delta, D, D / delta**2))
    return rows
