"""Line-oriented run and sweep configuration.

Grammar, one setting per line::

    # comment (also allowed after a value)
    section.key = value

Keys are dotted paths, values are unquoted. Matrices are four numbers in
row-major order separated by commas or spaces, lists are comma separated.
Unknown keys, duplicates, missing required keys, bad types and constraint
violations all raise :class:`~membrane_patterns.errors.ConfigError` naming
the key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import PatternThresholds
from .errors import ConfigError, MembraneError
from .model import ModelParams
from .potentials import PotentialSpec
from .scheme import SolverSettings

OUTPUT_FORMATS = ("csv", "pgm", "vtk", "raw")
MAX_SWEEP_CELLS = 64

# key -> (attribute, type); order here is the serialisation order
_RUN_KEYS = {
    "mesh.n": ("n", int),
    "time.tau": ("tau", float),
    "time.t_end": ("t_end", float),
    "params.eps": ("eps", float),
    "params.kappa": ("kappa", float),
    "params.sigma": ("sigma", float),
    "params.lambda": ("lam", float),
    "params.G": ("G", "matrix"),
    "params.L": ("L", "matrix"),
    "potential.variant": ("potential_variant", str),
    "potential.theta": ("theta", float),
    "potential.theta_c": ("theta_c", float),
    "potential.mu0": ("mu0", float),
    "potential.delta": ("delta", float),
    "potential.a4": ("a4", float),
    "potential.a2": ("a2", float),
    "potential.a0": ("a0", float),
    "potential.lam": ("potential_lam", float),
    "init.mean_u": ("mean_u", float),
    "init.amplitude": ("amplitude", float),
    "init.seed": ("seed", int),
    "init.h0_const": ("h0_const", float),
    "solver.newton_tol": ("newton_tol", float),
    "solver.minres_tol": ("minres_tol", float),
    "solver.max_newton": ("max_newton", int),
    "output.dir": ("output_dir", str),
    "output.every_steps": ("every_steps", int),
    "output.formats": ("formats", "list"),
    "pattern.threshold": ("pattern_threshold", float),
    "pattern.homogeneous_hi": ("homogeneous_hi", float),
    "pattern.homogeneous_lo": ("homogeneous_lo", float),
    "pattern.dots_min_components": ("dots_min_components", int),
    "pattern.dots_max_elongation": ("dots_max_elongation", float),
    "pattern.stripes_min_elongation": ("stripes_min_elongation", float),
}
_REQUIRED = ("mesh.n", "time.tau", "time.t_end", "params.eps", "params.kappa",
             "init.mean_u", "init.amplitude", "init.seed")
_SWEEP_KEYS = ("sweep.axis1.path", "sweep.axis1.values", "sweep.axis2.path",
               "sweep.axis2.values", "sweep.workers", "sweep.max_cells")


@dataclass(frozen=True)
class RunConfig:
    n: int
    tau: float
    t_end: float
    eps: float
    kappa: float
    mean_u: float
    amplitude: float
    seed: int
    sigma: float | None = None
    lam: float | None = None
    G: tuple | None = None
    L: tuple | None = None
    potential_variant: str = "log_extended"
    theta: float = 4.0
    theta_c: float = 5.0
    mu0: float = 0.0
    delta: float = 0.02
    a4: float = 1.0
    a2: float = 2.0
    a0: float = 0.0
    potential_lam: float = 0.01
    h0_const: float = 0.0
    newton_tol: float = 1e-9
    minres_tol: float = 1e-10
    max_newton: int = 50
    output_dir: str = "output"
    every_steps: int = 100
    formats: tuple = ("csv",)
    pattern_threshold: float = 0.0
    homogeneous_hi: float = 0.95
    homogeneous_lo: float = 0.05
    dots_min_components: int = 5
    dots_max_elongation: float = 2.0
    stripes_min_elongation: float = 3.0
    explicit_keys: frozenset = field(default=frozenset(), compare=False, repr=False)

    # -- derived objects ---------------------------------------------------
    @property
    def isotropic(self) -> bool:
        return self.G is None

    @property
    def steps(self) -> int:
        """Number of time steps, ``ceil(t_end / tau)``."""
        return int(math.ceil(self.t_end / self.tau - 1e-9))

    def potential(self) -> PotentialSpec:
        v = self.potential_variant
        if v == "polynomial":
            return PotentialSpec(v, a4=self.a4, a2=self.a2, a0=self.a0, mu0=self.mu0)
        return PotentialSpec(v, theta=self.theta, theta_c=self.theta_c, mu0=self.mu0,
                             delta=self.delta, lam=self.potential_lam if v == "moreau_yosida" else 0.0)

    def model_params(self) -> ModelParams:
        if self.isotropic:
            return ModelParams.isotropic(self.eps, self.kappa, self.tau, self.sigma, self.lam,
                                         self.potential())
        return ModelParams(self.eps, self.kappa, self.tau, np.reshape(self.G, (2, 2)),
                           np.reshape(self.L, (2, 2)), self.potential())

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(newton_tol=self.newton_tol, minres_tol=self.minres_tol,
                              max_newton=self.max_newton)

    def thresholds(self) -> PatternThresholds:
        return PatternThresholds(self.homogeneous_hi, self.homogeneous_lo,
                                 self.dots_min_components, self.dots_max_elongation,
                                 self.stripes_min_elongation)

    def with_value(self, key: str, value) -> "RunConfig":
        """Copy with one dotted key replaced; the result is validated again."""
        items = to_items(self)
        if key not in _RUN_KEYS:
            raise ConfigError("unknown key", key)
        if key in ("params.sigma", "params.lambda"):
            items.pop("params.G", None)
            items.pop("params.L", None)
        items[key] = value if isinstance(value, str) else _format(value)
        return from_items(items)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _tokenize(text: str) -> dict:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or any(ch.isspace() for ch in key):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in items:
            raise ConfigError("duplicate key", key)
        if value == "":
            raise ConfigError("empty value", key)
        items[key] = value
    return items


def _convert(key, text, kind):
    try:
        if kind is int:
            if not text.lstrip("+-").isdigit():
                raise ValueError
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        if kind == "matrix":
            parts = text.replace(",", " ").split()
            if len(parts) != 4:
                raise ValueError
            return tuple(float(p) for p in parts)
        if kind == "list":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        return text
    except ValueError:
        name = {int: "an integer", float: "a finite number", "matrix": "four numbers",
                "list": "a list"}.get(kind, "text")
        raise ConfigError(f"expected {name}, got {text!r}", key) from None


def _validate(cfg: RunConfig):
    def need(cond, key, message):
        if not cond:
            raise ConfigError(message, key)

    need(cfg.n >= 4, "mesh.n", "must be at least 4")
    need(cfg.tau > 0, "time.tau", "must be positive")
    need(cfg.t_end >= cfg.tau, "time.t_end", "must be at least time.tau")
    need(cfg.eps > 0, "params.eps", "must be positive")
    need(cfg.kappa > 0, "params.kappa", "must be positive")
    need(cfg.amplitude >= 0, "init.amplitude", "must be nonnegative")
    need(cfg.seed >= 0, "init.seed", "must be nonnegative")
    need(cfg.every_steps >= 1, "output.every_steps", "must be at least 1")
    need(cfg.newton_tol > 0, "solver.newton_tol", "must be positive")
    need(cfg.minres_tol > 0, "solver.minres_tol", "must be positive")
    need(cfg.max_newton >= 1, "solver.max_newton", "must be at least 1")
    for fmt in cfg.formats:
        need(fmt in OUTPUT_FORMATS, "output.formats", f"unknown format {fmt!r}")
    if cfg.isotropic:
        need(cfg.sigma > 0, "params.sigma", "must be positive")
        need(cfg.lam >= 0, "params.lambda", "must be nonnegative")
    for key, build in (("potential.variant", cfg.potential), ("params.G", cfg.model_params)):
        try:
            build()
        except ConfigError:
            raise
        except MembraneError as exc:
            raise ConfigError(str(exc), key) from None


def from_items(items: dict) -> RunConfig:
    unknown = sorted(set(items) - set(_RUN_KEYS))
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    for key in _REQUIRED:
        if key not in items:
            raise ConfigError("missing required key", key)
    iso = {"params.sigma", "params.lambda"} & set(items)
    mat = {"params.G", "params.L"} & set(items)
    if iso and mat:
        raise ConfigError("give either params.sigma/params.lambda or params.G/params.L",
                          sorted(mat)[0])
    if not mat:
        for key in ("params.sigma", "params.lambda"):
            if key not in items:
                raise ConfigError("missing required key", key)
    else:
        for key in ("params.G", "params.L"):
            if key not in items:
                raise ConfigError("missing required key", key)
    values = {}
    for key, text in items.items():
        attr, kind = _RUN_KEYS[key]
        values[attr] = _convert(key, text, kind)
    cfg = RunConfig(**values, explicit_keys=frozenset(items))
    _validate(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate the text of a run configuration."""
    return from_items(_tokenize(text))


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format(value) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not configuration values")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def to_items(cfg: RunConfig) -> dict:
    """Every key with its value text; shape keys follow the isotropic/matrix choice."""
    skip = {"params.G", "params.L"} if cfg.isotropic else {"params.sigma", "params.lambda"}
    items = {}
    for key, (attr, _) in _RUN_KEYS.items():
        if key in skip:
            continue
        items[key] = _format(getattr(cfg, attr))
    return items


def serialize(cfg: RunConfig) -> str:
    """Canonical text; ``parse_config(serialize(c)) == c``."""
    return "".join(f"{k} = {v}\n" for k, v in to_items(cfg).items())


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxis:
    path: str
    values: tuple


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axes: tuple
    workers: int = 1
    max_cells: int = MAX_SWEEP_CELLS

    def cells(self):
        """``(index, {path: value_text}, RunConfig)`` in row-major axis order."""
        grids = [[(ax.path, v) for v in ax.values] for ax in self.axes]
        combos = [[]]
        for grid in grids:
            combos = [c + [pv] for c in combos for pv in grid]
        out = []
        for index, combo in enumerate(combos):
            cfg = self.base
            for path, value in combo:
                cfg = cfg.with_value(path, value)
            out.append((index, dict(combo), cfg))
        return out

    def with_workers(self, workers: int) -> "SweepConfig":
        return replace(self, workers=workers)


def parse_sweep(text: str) -> SweepConfig:
    items = _tokenize(text)
    sweep = {k: items.pop(k) for k in list(items) if k.startswith("sweep.")}
    unknown = sorted(set(sweep) - set(_SWEEP_KEYS))
    if unknown:
        raise ConfigError("unknown key", unknown[0])
    base = from_items(items)
    axes = []
    for a in (1, 2):
        path_key, values_key = f"sweep.axis{a}.path", f"sweep.axis{a}.values"
        if path_key not in sweep and values_key not in sweep:
            continue
        if path_key not in sweep or values_key not in sweep:
            missing = path_key if path_key not in sweep else values_key
            raise ConfigError("missing required key", missing)
        path = sweep[path_key]
        if path not in _RUN_KEYS:
            raise ConfigError(f"unknown parameter path {path!r}", path_key)
        values = _convert(values_key, sweep[values_key], "list")
        if not values:
            raise ConfigError("needs at least one value", values_key)
        axes.append(SweepAxis(path, values))
    if not axes:
        raise ConfigError("missing required key", "sweep.axis1.path")
    if len(axes) == 2 and axes[0].path == axes[1].path:
        raise ConfigError("axes must vary different parameters", "sweep.axis2.path")
    workers = _convert("sweep.workers", sweep.get("sweep.workers", "1"), int)
    max_cells = _convert("sweep.max_cells", sweep.get("sweep.max_cells", str(MAX_SWEEP_CELLS)), int)
    if workers < 1:
        raise ConfigError("must be at least 1", "sweep.workers")
    total = int(np.prod([len(ax.values) for ax in axes]))
    if total > max_cells:
        raise ConfigError(f"grid has {total} cells, cap is {max_cells}", "sweep.max_cells")
    cfg = SweepConfig(base, tuple(axes), workers, max_cells)
    cfg.cells()  # every cell must validate up front
    return cfg


def load_sweep(path) -> SweepConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_sweep(fh.read())
