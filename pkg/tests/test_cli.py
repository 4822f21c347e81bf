import os
import subprocess
import sys

import pytest

from membrane_patterns.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER, main

BASE = """mesh.n = 8
time.tau = 1e-4
time.t_end = 0.0005
params.eps = 0.01
params.kappa = 0.01
params.sigma = 1.0
params.lambda = 0.6
init.mean_u = 0.1
init.amplitude = 0.2
init.seed = 7
output.formats = pgm
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text=BASE, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def test_simulate(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", cfg(), "--output-dir", str(out)]) == EXIT_OK
    assert "status=ok steps=5" in capsys.readouterr().out
    assert (out / "diagnostics.csv").exists()


def test_seed_override_changes_result(cfg, tmp_path):
    main(["simulate", cfg(), "--output-dir", str(tmp_path / "a")])
    main(["simulate", cfg(), "--output-dir", str(tmp_path / "b"), "--seed-override", "9"])
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() != \
        (tmp_path / "b" / "diagnostics.csv").read_bytes()
    assert "init.seed = 9" in (tmp_path / "b" / "config.cfg").read_text()


def test_config_error_exit_code(cfg, capsys):
    path = cfg(BASE.replace("params.sigma = 1.0", "params.sigma = -1"))
    assert main(["simulate", path]) == EXIT_CONFIG
    assert "params.sigma" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["simulate", str(tmp_path / "absent.cfg")]) == EXIT_IO


def test_solver_failure_exit_code(cfg, tmp_path):
    path = cfg(BASE + "solver.max_newton = 1\nsolver.newton_tol = 1e-30\n")
    assert main(["simulate", path, "--output-dir", str(tmp_path / "o")]) == EXIT_SOLVER
    assert (tmp_path / "o" / "FAILED.txt").exists()


def test_units(cfg, capsys):
    assert main(["units", cfg()]) == EXIT_OK
    out = capsys.readouterr().out
    assert "lambda_phys  3e-11 J/m" in out and "sigma_phys   5e-05 J/m^2" in out


def test_sweep(cfg, tmp_path, capsys):
    path = cfg(BASE + "sweep.axis1.path = params.lambda\nsweep.axis1.values = 0.2, 0.6\n")
    assert main(["sweep", path, "--output-dir", str(tmp_path / "s"), "--workers", "1"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("cell,params.lambda,status")
    assert main(["sweep", path, "--workers", "0"]) == EXIT_CONFIG


def test_probe_dependence(cfg, capsys):
    assert main(["probe-dependence", cfg(), "--deltas", "0", "1e-3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "delta,D,D_over_delta_sq" and lines[1].startswith("0.0,0.0,nan")


def test_console_entry_point(cfg):
    proc = subprocess.run([sys.executable, "-m", "membrane_patterns.cli", "units", cfg()],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0 and "E_c" in proc.stdout
