"""Command line interface.

    membrane-patterns simulate <config> [--output-dir D] [--seed-override S]
    membrane-patterns sweep <config> [--output-dir D] [--workers W] [--seed-override S]
    membrane-patterns units <config>
    membrane-patterns probe-dependence <config> --deltas 1e-2 1e-3 [--seed-override S]

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 IO error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .artifacts import physical_units
from .config import load_config, load_sweep
from .errors import ConfigError, MembraneError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _build_parser():
    parser = argparse.ArgumentParser(prog="membrane-patterns",
                                     description="Membrane pattern formation simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, workers=False):
        p.add_argument("config", help="path to a key = value configuration file")
        p.add_argument("--output-dir", help="override output.dir")
        p.add_argument("--seed-override", type=int, help="override init.seed")
        if workers:
            p.add_argument("--workers", type=int, help="parallel sweep cells")

    common(sub.add_parser("simulate", help="run one simulation"))
    common(sub.add_parser("sweep", help="run a parameter grid"), workers=True)
    sub.add_parser("units", help="print parameters in physical units").add_argument("config")
    probe = sub.add_parser("probe-dependence", help="continuous dependence on initial data")
    common(probe)
    probe.add_argument("--deltas", type=float, nargs="+", required=True,
                       help="perturbation magnitudes")
    return parser


def _seeded(cfg, seed):
    return cfg if seed is None else cfg.with_value("init.seed", seed)


def _simulate(args):
    from .driver import run_simulation

    cfg = _seeded(load_config(args.config), args.seed_override)
    progress = None
    if args.verbose:
        progress = lambda s, e: logging.info("step %d t=%.4g E=%.10g", s.step, s.time, e.e_total)
    res = run_simulation(cfg, args.output_dir, progress=progress)
    print(f"status={res.status} steps={res.state.step} e_total={res.energy.e_total!r} "
          f"pattern={res.pattern.label} components={res.pattern.components}")
    if res.status != "ok":
        print(res.message, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _sweep(args):
    from .driver import run_sweep

    sweep = load_sweep(args.config)
    if args.seed_override is not None:
        sweep = type(sweep)(_seeded(sweep.base, args.seed_override), sweep.axes, sweep.workers,
                            sweep.max_cells)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("must be at least 1", "--workers")
        sweep = sweep.with_workers(args.workers)
    res = run_sweep(sweep, args.output_dir)
    with open(res.summary_path, encoding="ascii") as fh:
        sys.stdout.write(fh.read())
    failed = [r for r in res.records if r["status"] != "ok"]
    return EXIT_SOLVER if failed else EXIT_OK


def _units(args):
    cfg = load_config(args.config)
    table = physical_units(cfg.model_params())
    units = {"E_c": "J", "lambda_phys": "J/m", "sigma_phys": "J/m^2", "kappa_phys": "J",
             "eps_phys": "J"}
    for key, value in table.items():
        print(f"{key:12s} {value:.6g} {units[key]}")
    return EXIT_OK


def _probe(args):
    from .diagnostics import continuous_dependence_probe

    cfg = _seeded(load_config(args.config), args.seed_override)
    rows = continuous_dependence_probe(cfg, args.deltas)
    print("delta,D,D_over_delta_sq")
    for r in rows:
        print(f"{r.delta!r},{r.D!r},{r.ratio!r}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler = {"simulate": _simulate, "sweep": _sweep, "units": _units,
               "probe-dependence": _probe}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MembraneError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
