"""Deterministic initialisation, simulation runs and parameter sweeps."""

from __future__ import annotations

import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import artifacts
from .config import RunConfig, SweepConfig, serialize
from .diagnostics import EnergyBreakdown, PatternMetrics, discrete_energy, minority_pattern_metrics
from .errors import StepFailure
from .mesh import TorusMesh, build_torus_mesh
from .model import Operators, SimState
from .scheme import advance

log = logging.getLogger(__name__)

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 generator started at ``seed``."""
    state = np.uint64(seed % 2**64)
    k = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = state + k * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def uniform_draws(seed: int, count: int) -> np.ndarray:
    """Doubles in ``[0, 1)`` from the top 53 bits of each splitmix64 output."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def init_fields(config: RunConfig, mesh: TorusMesh | None = None) -> SimState:
    """``u = mean_u + U[-a, a]`` per vertex in index order, noise shifted to zero mean."""
    mesh = mesh or build_torus_mesh(config.n)
    N = mesh.vertex_count
    noise = config.amplitude * (2.0 * uniform_draws(config.seed, N) - 1.0)
    # every lumped weight equals 1/N on the uniform mesh
    u = config.mean_u + (noise - noise.mean())
    h = np.full(N, config.h0_const)
    return SimState(u=u, mu=np.zeros(N), h=h, g=np.zeros(N))


@dataclass
class RunResult:
    status: str                      # "ok" or "solver_failure"
    state: SimState
    energy: EnergyBreakdown
    pattern: PatternMetrics
    rows: list = field(repr=False, default_factory=list)
    message: str = ""
    output_dir: str | None = None


def _row(state, energy, ops, newton, krylov):
    e = energy
    return [state.step, state.time, ops.mass_of(state.u), ops.mass_of(state.h), e.e_potential,
            e.e_grad_u, e.e_surface, e.e_bend, e.e_coupling, e.e_total, newton, krylov]


def simulate(config: RunConfig, state: SimState | None = None, output_dir=None,
             progress=None) -> RunResult:
    """Run ``config.steps`` time steps.

    With ``output_dir`` the diagnostics CSV, snapshots and (on failure) a
    failure record plus the last good state are written there.
    """
    mesh = build_torus_mesh(config.n)
    params = config.model_params()
    ops = Operators(mesh, params)
    settings = config.solver_settings()
    state = (state or init_fields(config, mesh)).copy()
    n, every, formats = config.n, config.every_steps, config.formats
    snap_dir = os.path.join(output_dir, "snapshots") if output_dir else None
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        with open(os.path.join(output_dir, "config.cfg"), "w", encoding="utf-8") as fh:
            fh.write(serialize(config))

    energy = discrete_energy(state, params, ops)
    rows = [_row(state, energy, ops, 0, 0)]
    if snap_dir:
        artifacts.write_snapshot(state, n, snap_dir, formats)
    newton = krylov = 0
    status, message = "ok", ""
    total = config.steps
    for k in range(total):
        try:
            state, stats = advance(state, params, ops, settings)
        except StepFailure as exc:
            status = "solver_failure"
            message = f"step {state.step + 1}: {exc}"
            log.error("simulation failed at %s", message)
            break
        newton += stats.newton_iters
        krylov += stats.krylov_outer + stats.krylov_inner
        if state.step % every == 0 or k == total - 1:
            energy = discrete_energy(state, params, ops)
            rows.append(_row(state, energy, ops, newton, krylov))
            newton = krylov = 0
            if snap_dir:
                artifacts.write_snapshot(state, n, snap_dir, formats)
            if progress:
                progress(state, energy)

    energy = discrete_energy(state, params, ops)
    pattern = minority_pattern_metrics(state.u, config.pattern_threshold, config.thresholds())
    if output_dir:
        artifacts.write_csv(os.path.join(output_dir, "diagnostics.csv"), artifacts.DIAG_COLUMNS,
                            rows)
        if status != "ok":
            _write_failure(output_dir, message, state, n)
    return RunResult(status, state, energy, pattern, rows, message, output_dir)


def _write_failure(output_dir, message, state, n):
    with open(os.path.join(output_dir, "FAILED.txt"), "w", encoding="utf-8") as fh:
        fh.write(message + "\n")
        fh.write(f"last good step={state.step} time={artifacts._fmt(state.time)}\n")
    artifacts.write_snapshot(state, n, os.path.join(output_dir, "last_good"), ("raw",),
                             tag="last_good")


def run_simulation(config: RunConfig, output_dir=None, progress=None) -> RunResult:
    """:func:`simulate` from :func:`init_fields`, writing into ``output_dir`` (default ``output.dir``)."""
    return simulate(config, output_dir=output_dir or config.output_dir, progress=progress)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SUMMARY_ENERGY = ("e_potential", "e_grad_u", "e_surface", "e_bend", "e_coupling", "e_total")
SUMMARY_PATTERN = ("components", "area_fraction", "elongation", "label")


def _run_cell(job):
    index, config, out_dir = job
    try:
        res = simulate(config, output_dir=out_dir)
        return index, res.status, res.energy.as_dict(), res.pattern, res.message
    except Exception as exc:  # recorded, the sweep carries on
        return index, "error", None, None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"


@dataclass
class SweepResult:
    summary_path: str
    records: list


def run_sweep(sweep: SweepConfig, output_dir=None, workers=None) -> SweepResult:
    """Run every grid cell into ``cell_<index>`` and write ``summary.csv`` sorted by index."""
    output_dir = output_dir or sweep.base.output_dir
    workers = workers or sweep.workers
    os.makedirs(output_dir, exist_ok=True)
    cells = sweep.cells()
    jobs = [(i, cfg, os.path.join(output_dir, f"cell_{i:03d}")) for i, _, cfg in cells]
    if workers == 1:
        results = [_run_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    results.sort(key=lambda r: r[0])

    paths = [ax.path for ax in sweep.axes]
    header = ["cell", *paths, "status", *SUMMARY_ENERGY, *SUMMARY_PATTERN]
    records = []
    lines = [",".join(header) + "\n"]
    for (index, values, _), (_, status, energy, pattern, message) in zip(cells, results):
        rec = {"cell": index, **values, "status": status, "message": message}
        fields_out = [str(index), *(values[p] for p in paths), status]
        if energy is not None:
            rec.update(energy)
            rec.update(components=pattern.components, area_fraction=pattern.area_fraction,
                       elongation=pattern.elongation, label=pattern.label)
            fields_out += [artifacts._fmt(energy[k]) for k in SUMMARY_ENERGY]
            fields_out += [str(pattern.components), artifacts._fmt(pattern.area_fraction),
                           artifacts._fmt(pattern.elongation), pattern.label]
        else:
            fields_out += [""] * (len(SUMMARY_ENERGY) + len(SUMMARY_PATTERN))
            with open(os.path.join(output_dir, f"cell_{index:03d}_ERROR.txt"), "w",
                      encoding="utf-8") as fh:
                fh.write(message)
        records.append(rec)
        lines.append(",".join(fields_out) + "\n")
    summary = os.path.join(output_dir, "summary.csv")
    with open(summary, "w", encoding="ascii", newline="") as fh:
        fh.writelines(lines)
    return SweepResult(summary, records)
