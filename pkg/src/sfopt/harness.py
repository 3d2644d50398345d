"""Experiment configs and the runners that turn them into artifacts.

A config is a strict, JSON-round-trippable description of one run: any
unknown key is an error, every float survives the trip bit for bit, and the
whole pipeline downstream of a config is a pure function of it.  The same
config therefore always yields byte-identical CSVs, serial or parallel.

Mini-batch randomness is keyed by ``(seed, 2, bits(alpha), bits(weight_decay))``,
so a grid cell re-run in isolation, or as a single experiment with the same
optimizer settings, replays the exact batch stream it saw inside the grid.
"""

from __future__ import annotations

import inspect
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimators import OPTIMIZERS
from .exceptions import ConfigError, NonRectangularGrid
from .mlp import MlpProblem, MlpSpec, mlp_init
from .problems import LossScaler, Quadratic, gen_blobs
from .trace import format_float, read_csv, write_csv
from .diagnostics import record_update_histogram

__all__ = [
    "QuadraticProblemConfig",
    "MlpProblemConfig",
    "ScheduleConfig",
    "RecordConfig",
    "ExperimentConfig",
    "GridSpec",
    "ExperimentResult",
    "GridResult",
    "build_problem",
    "build_estimator",
    "run_experiment",
    "run_grid",
    "write_grid_csv",
    "read_grid_csv",
]


def _strict(cls, data: dict, where: str):
    """Construct a config dataclass, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {where} section: {exc}") from None


@dataclass(frozen=True)
class QuadraticProblemConfig:
    h_diag: tuple
    b: tuple | None = None
    c: float = 0.0

    def build(self) -> Quadratic:
        return Quadratic(self.h_diag, self.b, self.c)

    def to_dict(self):
        d = {"kind": "quadratic", "h_diag": list(self.h_diag), "c": self.c}
        if self.b is not None:
            d["b"] = list(self.b)
        return d


@dataclass(frozen=True)
class MlpProblemConfig:
    depth: int = 8
    width: int = 16
    n_classes: int = 3
    dim: int = 16
    n_per_class: int = 512
    spread: float = 1.0
    batch_size: int | None = 128

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")
        if self.width < 1:
            raise ConfigError(f"width must be >= 1, got {self.width}")

    def spec(self, seed: int) -> MlpSpec:
        widths = (self.dim,) + (self.width,) * self.depth + (self.n_classes,)
        return MlpSpec(layer_widths=widths, init_seed=seed)

    def to_dict(self):
        return {
            "kind": "mlp", "depth": self.depth, "width": self.width,
            "n_classes": self.n_classes, "dim": self.dim,
            "n_per_class": self.n_per_class, "spread": self.spread,
            "batch_size": self.batch_size,
        }


def _problem_config_from_dict(data: dict):
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("problem config needs a 'kind' key")
    kind = data["kind"]
    rest = {k: v for k, v in data.items() if k != "kind"}
    if kind == "quadratic":
        cfg = _strict(QuadraticProblemConfig, rest, "problem")
        return QuadraticProblemConfig(
            h_diag=tuple(cfg.h_diag),
            b=tuple(cfg.b) if cfg.b is not None else None,
            c=float(cfg.c),
        )
    if kind == "mlp":
        return _strict(MlpProblemConfig, rest, "problem")
    raise ConfigError(f"unknown problem kind {kind!r}")


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "constant"
    eta0: float = 1.0
    horizon: int | None = None

    def to_dict(self):
        d = {"kind": self.kind, "eta0": self.eta0}
        if self.horizon is not None:
            d["horizon"] = self.horizon
        return d


@dataclass(frozen=True)
class RecordConfig:
    iterates: bool = False
    updates: bool = False
    histogram_epochs: tuple = ()

    def to_dict(self):
        return {
            "iterates": self.iterates, "updates": self.updates,
            "histogram_epochs": list(self.histogram_epochs),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run depends on: problem, optimizer, schedule, seed."""

    problem: QuadraticProblemConfig | MlpProblemConfig
    optimizer: dict
    seed: int = 1729
    steps: int = 500
    x0: tuple | None = None
    loss_factor: float = 1.0
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    record: RecordConfig = field(default_factory=RecordConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if not (self.loss_factor > 0.0):
            raise ConfigError(f"loss_factor must be positive, got {self.loss_factor}")
        name = self.optimizer.get("name")
        if name not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {name!r}")
        allowed = set(inspect.signature(OPTIMIZERS[name].__init__).parameters)
        allowed -= {"self", "steps", "schedule", "eta0", "record_iterates",
                    "record_updates"}
        unknown = sorted(set(self.optimizer) - allowed - {"name"})
        if unknown:
            raise ConfigError(f"unknown keys in optimizer: {', '.join(unknown)}")

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "x0": list(self.x0) if self.x0 is not None else None,
            "loss_factor": self.loss_factor,
            "problem": self.problem.to_dict(),
            "optimizer": dict(self.optimizer),
            "schedule": self.schedule.to_dict(),
            "record": self.record.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be an object")
        known = {"seed", "steps", "x0", "loss_factor", "problem", "optimizer",
                 "schedule", "record"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown keys in config: {', '.join(unknown)}")
        for key in ("problem", "optimizer"):
            if key not in data:
                raise ConfigError(f"config needs a {key!r} section")
        schedule = _strict(ScheduleConfig, data.get("schedule", {}), "schedule")
        record = data.get("record", {})
        record = _strict(RecordConfig, record, "record")
        record = RecordConfig(record.iterates, record.updates,
                              tuple(record.histogram_epochs))
        x0 = data.get("x0")
        return cls(
            problem=_problem_config_from_dict(data["problem"]),
            optimizer=dict(data["optimizer"]),
            seed=int(data.get("seed", 1729)),
            steps=int(data.get("steps", 500)),
            x0=tuple(x0) if x0 is not None else None,
            loss_factor=float(data.get("loss_factor", 1.0)),
            schedule=schedule,
            record=record,
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())


def _float_bits(v: float) -> int:
    return int(np.float64(v).view(np.uint64))


def resolved_optimizer_params(cfg: ExperimentConfig) -> dict:
    """Optimizer params with the estimator's defaults filled in."""
    name = cfg.optimizer["name"]
    sig = inspect.signature(OPTIMIZERS[name].__init__)
    out = {"name": name}
    for pname, par in sig.parameters.items():
        if pname in ("self", "steps", "schedule", "eta0",
                     "record_iterates", "record_updates"):
            continue
        out[pname] = cfg.optimizer.get(pname, par.default)
    return out

def build_problem(cfg: ExperimentConfig):
    """Materialize the problem and starting point a config describes."""
    if isinstance(cfg.problem, QuadraticProblemConfig):
        problem = cfg.problem.build()
        if cfg.x0 is None:
            raise ConfigError("quadratic problems need an explicit x0")
        x0 = np.asarray(cfg.x0, dtype=np.float64)
    else:
        spec = cfg.problem.spec(cfg.seed)
        dataset = gen_blobs(cfg.seed, cfg.problem.n_classes, cfg.problem.dim,
                            cfg.problem.n_per_class, cfg.problem.spread)
        params = resolved_optimizer_params(cfg)
        stream = (2, _float_bits(params.get("alpha", 0.0) or 0.0),
                  _float_bits(params.get("weight_decay", 0.0) or 0.0))
        problem = MlpProblem(spec, dataset, batch_size=cfg.problem.batch_size,
                             seed=cfg.seed, stream_id=stream)
        x0 = mlp_init(spec) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64)
    if cfg.loss_factor != 1.0:
        problem = LossScaler(problem, cfg.loss_factor)
    return problem, x0


def build_estimator(cfg: ExperimentConfig):
    name = cfg.optimizer["name"]
    cls = OPTIMIZERS[name]
    params = {k: v for k, v in cfg.optimizer.items() if k != "name"}
    sig = inspect.signature(cls.__init__).parameters
    if "schedule" in sig:
        params["schedule"] = cfg.schedule.kind
        params["eta0"] = cfg.schedule.eta0
    if "steps" in sig:
        params["steps"] = cfg.steps
    if "record_iterates" in sig:
        params["record_iterates"] = cfg.record.iterates
    if "record_updates" in sig:
        want_updates = cfg.record.updates or bool(cfg.record.histogram_epochs)
        params["record_updates"] = want_updates
    return cls(**params)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: "RunTrace"
    metrics: dict
    histograms: dict
    files: list


def _steps_per_epoch(problem) -> int:
    return int(getattr(problem, "steps_per_epoch", 1))


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run one config; optionally write trace/histogram artifacts.

    Output files: ``trace.csv`` always, and for every requested epoch e a
    ``hist_<optimizer>_<e>.csv`` plus the run's metric values in the result.
    """
    problem, x0 = build_problem(cfg)
    est = build_estimator(cfg)
    est.fit(problem, x0)
    trace = est.trace_
    diverged = bool(getattr(est, "diverged_", False))

    metrics = {"final_loss": math.inf, "final_error": math.inf}
    if not diverged:
        x = est.x_
        if isinstance(cfg.problem, QuadraticProblemConfig):
            gap = problem.value(x) - problem.value(problem.minimizer)
            metrics["final_loss"] = float(gap)
            metrics["final_error"] = float(np.max(np.abs(x - problem.minimizer)))
        else:
            metrics["final_loss"] = float(problem.value(x))
            metrics["final_error"] = float(problem.error_rate(x, "test"))

    spe = _steps_per_epoch(problem)
    histograms = {}
    for epoch in cfg.record.histogram_epochs:
        window = ((epoch - 1) * spe + 1, epoch * spe)
        histograms[int(epoch)] = record_update_histogram(trace, window)

    files = []
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trace_path = out / "trace.csv"
        trace.to_csv(trace_path)
        files.append(trace_path)
        name = cfg.optimizer["name"]
        for epoch, hist in histograms.items():
            path = out / f"hist_{name}_{epoch}.csv"
            hist.to_csv(path)
            files.append(path)
    return ExperimentResult(config=cfg, trace=trace, metrics=metrics,
                            histograms=histograms, files=files)


@dataclass(frozen=True)
class GridSpec:
    """The (alpha, weight_decay) product to sweep, row-major alpha-first."""

    alphas: tuple
    lambdas: tuple
    boundary_extension: bool = True

    def __post_init__(self):
        if not self.alphas or not self.lambdas:
            raise ConfigError("grid axes must be non-empty")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        if any(a <= 0 for a in self.alphas):
            raise ConfigError("alphas must be positive")
        if any(l < 0 for l in self.lambdas):
            raise ConfigError("lambdas must be nonnegative")

    def to_dict(self):
        return {"alphas": list(self.alphas), "lambdas": list(self.lambdas),
                "boundary_extension": self.boundary_extension}

    @classmethod
    def from_dict(cls, data):
        cfg = _strict(cls, data, "grid")
        return cls(tuple(cfg.alphas), tuple(cfg.lambdas), bool(cfg.boundary_extension))


@dataclass
class GridResult:
    alphas: tuple
    lambdas: tuple
    metric: str
    matrix: np.ndarray            # shape (len(alphas), len(lambdas))
    errors: list                  # (i, j, message)
    best_ij: tuple
    best_alpha: float
    best_lambda: float
    on_boundary: bool
    boundary_axes: tuple


def _cell_config(cfg: ExperimentConfig, alpha: float, lam: float) -> ExperimentConfig:
    optimizer = dict(cfg.optimizer)
    optimizer["alpha"] = alpha
    optimizer["weight_decay"] = lam
    return ExperimentConfig(
        problem=cfg.problem, optimizer=optimizer, seed=cfg.seed, steps=cfg.steps,
        x0=cfg.x0, loss_factor=cfg.loss_factor, schedule=cfg.schedule,
        record=cfg.record,
    )


def _grid_cell(payload):
    i, j, cfg_dict, metric = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        result = run_experiment(cfg)
        return i, j, result.metrics[metric], None
    except Exception as exc:  # recorded per cell, never fatal for the sweep
        return i, j, math.inf, f"{type(exc).__name__}: {exc}"


def run_grid(cfg: ExperimentConfig, grid: GridSpec, metric: str = "final_loss",
             jobs: int = 1) -> GridResult:
    """Sweep the (alpha, weight_decay) product with a fixed model init.

    Every cell is an independent pure function of its own config (same seed,
    same init, batch stream keyed by the cell's values), so results do not
    depend on worker count or completion order.  A failed cell scores +inf
    and carries its error message in the result.
    """
    name = cfg.optimizer.get("name")
    sig = inspect.signature(OPTIMIZERS[name].__init__).parameters
    if "alpha" not in sig or "weight_decay" not in sig:
        raise ConfigError(f"optimizer {name!r} has no (alpha, weight_decay) axes")
    if metric not in ("final_loss", "final_error"):
        raise ConfigError(f"unknown metric {metric!r}")

    payloads = []
    for i, alpha in enumerate(grid.alphas):
        for j, lam in enumerate(grid.lambdas):
            cell = _cell_config(cfg, alpha, lam)
            payloads.append((i, j, cell.to_dict(), metric))

    matrix = np.full((len(grid.alphas), len(grid.lambdas)), math.inf)
    errors = []
    if jobs <= 1:
        outcomes = map(_grid_cell, payloads)
    else:
        with ProcessPoolExecutor(max_workers=int(jobs)) as pool:
            outcomes = list(pool.map(_grid_cell, payloads))
    for i, j, value, error in outcomes:
        matrix[i, j] = value
        if error is not None:
            errors.append((i, j, error))

    flat_best = int(np.argmin(matrix))
    bi, bj = divmod(flat_best, matrix.shape[1])
    axes = []
    if len(grid.alphas) > 1 and bi in (0, len(grid.alphas) - 1):
        axes.append("alpha")
    if len(grid.lambdas) > 1 and bj in (0, len(grid.lambdas) - 1):
        axes.append("lambda")
    on_boundary = bool(axes) and grid.boundary_extension
    return GridResult(
        alphas=grid.alphas, lambdas=grid.lambdas, metric=metric, matrix=matrix,
        errors=errors, best_ij=(bi, bj), best_alpha=grid.alphas[bi],
        best_lambda=grid.lambdas[bj], on_boundary=on_boundary,
        boundary_axes=tuple(axes),
    )


def write_grid_csv(result: GridResult, path):
    """One row per cell: alpha, lambda, metric value, status."""
    error_map = {(i, j): msg for i, j, msg in result.errors}
    rows = []
    for i, alpha in enumerate(result.alphas):
        for j, lam in enumerate(result.lambdas):
            rows.append([
                format_float(alpha),
                format_float(lam),
                format_float(result.matrix[i, j]),
                error_map.get((i, j), "ok"),
            ])
    write_csv(path, ["alpha", "lambda", result.metric, "status"], rows)


def read_grid_csv(path):
    """Parse a grid file back into (alphas, lambdas, matrix, metric name).

    Raises :class:`NonRectangularGrid` when the rows do not tile the full
    alpha x lambda product exactly once.
    """
    header, rows = read_csv(path)
    if len(header) != 4 or header[:2] != ["alpha", "lambda"]:
        raise ValueError(f"not a grid file: header {header!r}")
    metric = header[2]
    cells = {}
    for row in rows:
        cells[(float(row[0]), float(row[1]))] = float(row[2])
    alphas = tuple(sorted({a for a, _ in cells}))
    lambdas = tuple(sorted({l for _, l in cells}))
    if len(cells) != len(rows) or len(cells) != len(alphas) * len(lambdas):
        raise NonRectangularGrid(
            f"{len(rows)} rows cannot tile {len(alphas)} x {len(lambdas)} axes")
    matrix = np.empty((len(alphas), len(lambdas)))
    for (a, l), v in cells.items():
        matrix[alphas.index(a), lambdas.index(l)] = v
    return alphas, lambdas, matrix, metric
