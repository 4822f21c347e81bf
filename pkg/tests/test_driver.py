import filecmp
import os

import numpy as np
import pytest

from membrane_patterns.artifacts import read_csv, read_raw
from membrane_patterns.config import parse_config, parse_sweep
from membrane_patterns.driver import (init_fields, run_simulation, run_sweep, simulate,
                                      splitmix64, uniform_draws)

BASE = """
mesh.n = 8
time.tau = 1e-4
time.t_end = 0.001
params.eps = 0.01
params.kappa = 0.01
params.sigma = 1.0
params.lambda = 0.6
init.mean_u = 0.1
init.amplitude = 0.2
init.seed = 7
output.every_steps = 5
output.formats = csv, pgm
"""


def test_splitmix64_reference_values():
    # published outputs of splitmix64 seeded with 0
    assert [int(v) for v in splitmix64(0, 3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
                                                   0x06C45D188009454F]
    d = uniform_draws(1, 1000)
    assert d.min() >= 0.0 and d.max() < 1.0


def test_init_fields():
    cfg = parse_config(BASE)
    a, b = init_fields(cfg), init_fields(cfg)
    assert np.array_equal(a.u, b.u)
    assert abs(a.u.mean() - 0.1) <= 1e-14
    assert np.abs(a.u - 0.1).max() <= 0.2 + 1e-14
    assert not np.array_equal(init_fields(cfg.with_value("init.seed", 8)).u, a.u)
    flat = init_fields(cfg.with_value("init.amplitude", 0.0))
    assert np.all(flat.u == 0.1) and np.all(flat.h == 0.0)


def test_run_writes_artifacts(tmp_path):
    res = run_simulation(parse_config(BASE), tmp_path)
    assert res.status == "ok" and res.state.step == 10
    header, rows = read_csv(tmp_path / "diagnostics.csv")
    assert header[0] == "step" and list(rows[:, 0]) == [0, 5, 10]
    assert np.all(np.diff(rows[:, header.index("e_total")]) <= 1e-8)
    snaps = sorted(os.listdir(tmp_path / "snapshots"))
    assert "u_0000010.pgm" in snaps and "fields_0000000.csv" in snaps
    assert (tmp_path / "config.cfg").exists()


def test_constant_state_without_coupling_is_stationary():
    cfg = parse_config(BASE).with_value("init.amplitude", 0.0).with_value("params.lambda", 0.0)
    res = simulate(cfg)
    e = np.array(res.rows)[:, 4:10]
    assert np.all(e == e[0])


def test_rerun_is_byte_identical(tmp_path):
    cfg = parse_config(BASE)
    run_simulation(cfg, tmp_path / "a")
    run_simulation(cfg, tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a" / "snapshots", tmp_path / "b" / "snapshots")
    assert not cmp.diff_files and not cmp.left_only
    assert filecmp.cmp(tmp_path / "a" / "diagnostics.csv", tmp_path / "b" / "diagnostics.csv",
                       shallow=False)


def test_failure_leaves_partial_artifacts(tmp_path):
    cfg = parse_config(BASE + "solver.max_newton = 1\nsolver.newton_tol = 1e-30\n")
    res = run_simulation(cfg, tmp_path)
    assert res.status == "solver_failure" and "step 1" in res.message
    assert (tmp_path / "FAILED.txt").exists()
    u, meta = read_raw(tmp_path / "last_good" / "u_last_good.raw")
    assert meta["step"] == 0 and np.array_equal(u, init_fields(cfg).u)
    _, rows = read_csv(tmp_path / "diagnostics.csv")
    assert rows.shape[0] == 1


def test_one_cell_sweep_equals_single_run(tmp_path):
    sweep = parse_sweep(BASE + "sweep.axis1.path = params.lambda\nsweep.axis1.values = 0.6\n")
    res = run_sweep(sweep, tmp_path / "sweep")
    run_simulation(parse_config(BASE), tmp_path / "single")
    assert res.records[0]["status"] == "ok"
    assert filecmp.cmp(tmp_path / "sweep" / "cell_000" / "diagnostics.csv",
                       tmp_path / "single" / "diagnostics.csv", shallow=False)


def test_sweep_records_bad_cells(tmp_path):
    text = BASE + ("solver.max_newton = 1\nsolver.newton_tol = 1e-30\n"
                   "sweep.axis1.path = params.lambda\nsweep.axis1.values = 0.2, 0.6\n")
    res = run_sweep(parse_sweep(text), tmp_path)
    assert [r["status"] for r in res.records] == ["solver_failure"] * 2
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0].startswith("cell,params.lambda,status") and len(lines) == 3


@pytest.mark.slow
def test_sweep_identical_with_workers(tmp_path):
    text = BASE + ("sweep.axis1.path = params.lambda\nsweep.axis1.values = 0.2, 0.6\n"
                   "sweep.axis2.path = init.mean_u\nsweep.axis2.values = 0.1, 0.3\n")
    sweep = parse_sweep(text)
    run_sweep(sweep, tmp_path / "w1", workers=1)
    run_sweep(sweep, tmp_path / "w4", workers=4)
    assert (tmp_path / "w1" / "summary.csv").read_bytes() == \
        (tmp_path / "w4" / "summary.csv").read_bytes()


def _deviation(state, n):
    ops_mass = 1.0 / (n * n)
    m = state.u.mean()
    return float(np.sqrt(ops_mass * np.sum((state.u - m) ** 2)))


def test_instability_screen():
    screen = """
mesh.n = 32
time.tau = 1e-4
time.t_end = 0.05
params.eps = 0.01
params.kappa = 0.01
params.sigma = 1.0
params.lambda = 0.0
init.mean_u = 0.46
init.amplitude = 1e-4
init.seed = 1
"""
    # W''(0.46) > 0, so only the coupling can destabilise the homogeneous state
    stable = parse_config(screen)
    d0 = _deviation(init_fields(stable), 32)
    assert _deviation(simulate(stable).state, 32) < d0
    grown = _deviation(simulate(stable.with_value("params.lambda", 0.6)).state, 32)
    if not grown > d0:
        # growth under strong coupling is a qualitative expectation only
        import warnings
        warnings.warn(f"no growth with lambda = 0.6: {grown:.3e} <= {d0:.3e}")
