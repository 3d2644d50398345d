"""Command-line entry point: every experiment is one verb invocation.

Exit codes: 0 on success, 2 on usage errors (bad verb, flag, preset, or
config; nothing is written in that case), 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import ConfigError
from .harness import ExperimentConfig, GridSpec, run_experiment
from . import presets

__all__ = ["main", "build_parser"]


def _add_common(sub, config: bool = False):
    sub.add_argument("--out", metavar="DIR", default=None,
                     help="output directory (default: out/<verb>)")
    sub.add_argument("--seed", metavar="U64", type=int,
                     default=presets.DEFAULT_SEED,
                     help=f"run seed (default {presets.DEFAULT_SEED})")
    sub.add_argument("--jobs", metavar="N", type=int, default=1,
                     help="parallel workers for grid sweeps (default 1)")
    if config:
        sub.add_argument("--config", metavar="PATH", default=None,
                         help="JSON experiment config overriding the preset")


def _out_dir(args, verb: str) -> Path:
    return Path(args.out) if args.out else Path("out") / verb


def _print_files(files):
    for path in files:
        print(f"wrote {path}")


def _check_preset(name: str, allowed: tuple):
    if name not in allowed:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(allowed)}")


def _parse_scale(text: str):
    try:
        values = [float(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"--scale expects comma-separated floats, got {text!r}")
    if not values or any(v <= 0 for v in values):
        raise ConfigError("--scale entries must be positive")
    return values


def _cmd_quadratic(args) -> int:
    _check_preset(args.preset, ("fig1",))
    report = presets.run_fig1(out_dir=_out_dir(args, "fig1"))
    print(f"iterate deviation, curvature 1 vs 1e5: {report.pair_deviation:.3e}")
    print(f"adamw final sup-norm error: {report.adamw_final_err:.3e}")
    if report.gd_diverged:
        print(f"gd diverged at step {report.gd_steps_done}")
    else:
        print(f"gd final sup-norm error: {report.gd_final_err:.3e}")
    _print_files(report.files)
    return 0


def _cmd_theorem1(args) -> int:
    report = presets.run_theorem1(seed=args.seed,
                                  out_dir=_out_dir(args, "theorem1"))
    for optimizer, lam, dev in report.runs:
        print(f"{optimizer} lambda={lam:g}: max deviation {dev:.3e}")
    print(f"tolerance {report.tol:g}: {'pass' if report.passed else 'FAIL'}")
    _print_files(report.files)
    return 0


def _cmd_restart(args) -> int:
    report = presets.run_restart(out_dir=_out_dir(args, "restart"))
    con = report.contraction
    for i, (sq, bound, ok) in enumerate(
            zip(con.sq_errors, con.bounds, con.per_round_ok), start=1):
        print(f"round {i}: squared error {sq:.3e} <= bound {bound:.3e}: "
              f"{'ok' if ok else 'VIOLATED'}")
    print(f"contraction: {'pass' if con.passed else 'FAIL'}")
    _print_files(report.files)
    return 0


def _cmd_regret(args) -> int:
    report = presets.run_regret(out_dir=_out_dir(args, "regret"),
                                eta_scale=args.eta_scale)
    reg = report.regret
    print(f"eta {report.eta:.6g} over {report.steps} steps, "
          f"{reg.violations.shape[0]} comparators")
    print(f"max violation {reg.max_violation:.4f} "
          f"(bound right side {reg.rhs:.2f}): "
          f"{'pass' if reg.passed else 'VIOLATED'}")
    _print_files(report.files)
    return 0


def _cmd_scalefree(args) -> int:
    _check_preset(args.preset, ("quad", "mlp-rescale"))
    out = _out_dir(args, "scalefree")
    if args.preset == "mlp-rescale":
        report = presets.run_scalefree_mlp(seed=args.seed, out_dir=out)
        for (optimizer, factor), dev in sorted(report.deviations.items()):
            print(f"{optimizer} under loss x{factor:g}: deviation {dev:.3e}")
        print(f"decoupled decay within {report.adamw_tol:g}: "
              f"{'pass' if report.adamw_passed else 'FAIL'}")
        print(f"coupled decay beyond {report.adam_l2_floor:g}: "
              f"{'yes' if report.adam_l2_contrast else 'NO'}")
        _print_files(report.files)
        return 0
    scale = _parse_scale(args.scale)
    report = presets.run_scalefree_quad(
        optimizer=args.optimizer, eps=args.eps, scale=scale,
        lam=args.weight_decay, seed=args.seed)
    print(f"{args.optimizer}, eps={args.eps:g}, scale={args.scale}: "
          f"max deviation {report.max_rel_dev:.3e} over {report.n_steps} steps")
    print(f"tolerance {report.tol:g}: {'pass' if report.passed else 'FAIL'}")
    return 0


def _cmd_train_mlp(args) -> int:
    out = _out_dir(args, "train-mlp")
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        result = run_experiment(cfg, out_dir=out)
        print(f"final loss {result.metrics['final_loss']:.6g}  "
              f"final error {result.metrics['final_error']:.6g}")
        _print_files(result.files)
        return 0
    _check_preset(args.preset, ("default", "prox-pair"))
    if args.preset == "prox-pair":
        report = presets.run_prox_pair(seed=args.seed, out_dir=out)
        print(f"relative distance after {report.steps} constant-rate steps "
              f"(alpha={report.alpha:g}, lambda={report.lam:g}):")
        print(f"  l2 {report.rel_distance_l2:.3e}   "
              f"sup {report.rel_distance_sup:.3e}")
        print(f"final losses: adamw {report.final_loss_adamw:.4f}, "
              f"adamprox {report.final_loss_adamprox:.4f}")
        _print_files(report.files)
        return 0
    result = presets.run_train_mlp(seed=args.seed, out_dir=out)
    print(f"final loss {result.metrics['final_loss']:.6g}  "
          f"test error {result.metrics['final_error']:.6g}")
    _print_files(result.files)
    return 0


def _axis(text: str | None):
    if text is None:
        return None
    try:
        return tuple(float(part) for part in text.split(",") if part)
    except ValueError:
        raise ConfigError(f"expected comma-separated floats, got {text!r}")


def _cmd_grid(args) -> int:
    out = _out_dir(args, "grid")
    if args.config is None and args.preset == "loss-rescale":
        report = presets.run_rescale_grids(seed=args.seed, jobs=args.jobs,
                                           out_dir=out)
        for factor, cell in sorted(report.best_cells.items()):
            print(f"loss x{factor:g}: best cell {cell}")
        print(f"argmin identical across factors: "
              f"{'yes' if report.argmin_identical else 'NO'} "
              f"(alpha={report.best_alpha:g}, lambda={report.best_lambda:g})")
        print(f"coupled-decay best decay-positive cell: "
              f"alpha={report.adam_l2_best_alpha:g}, "
              f"lambda={report.adam_l2_best_lambda:g}")
        _print_files(report.files)
        return 0
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    else:
        _check_preset(args.preset, ("mlp-adamw", "loss-rescale"))
        cfg = presets.default_grid_config(args.seed)
    alphas = _axis(args.alphas)
    lambdas = _axis(args.lambdas)
    grid = None
    if alphas or lambdas:
        grid = GridSpec(alphas or presets.PROTOCOL_ALPHAS,
                        lambdas or presets.PROTOCOL_LAMBDAS)
    result, files = presets.run_grid_config(
        cfg, grid=grid, metric=args.metric, jobs=args.jobs, out_dir=out)
    print(f"best cell {result.best_ij}: alpha={result.best_alpha:g}, "
          f"lambda={result.best_lambda:g}, "
          f"{result.metric}={result.matrix[result.best_ij]:.6g}")
    if result.on_boundary:
        print(f"best cell lies on the grid boundary "
              f"({', '.join(result.boundary_axes)}); extend the grid")
    for i, j, message in result.errors:
        print(f"cell ({i}, {j}) failed: {message}")
    _print_files(files)
    return 0


def _cmd_hist(args) -> int:
    out = _out_dir(args, "hist")
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
        if not cfg.record.histogram_epochs:
            raise ConfigError("config records no histogram epochs")
        result = run_experiment(cfg, out_dir=out)
        for epoch, hist in sorted(result.histograms.items()):
            print(f"epoch {epoch}: {hist.total} recorded magnitudes")
        _print_files(result.files)
        return 0
    _check_preset(args.preset, ("depth-sweep",))
    report = presets.run_hist_depth_sweep(seed=args.seed, out_dir=out)
    for depth in report.depths:
        l2 = report.iqr[("adam_l2", depth)]
        w = report.iqr[("adamw", depth)]
        print(f"depth {depth}: spread adam_l2 {l2:.2f} octaves, "
              f"adamw {w:.2f} octaves, difference {l2 - w:+.2f}")
    print(f"wider-and-widening spread for coupled decay: "
          f"{'yes' if report.trend_ok else 'NO'}")
    _print_files(report.files)
    return 0


def _cmd_plot(args) -> int:
    from .diagnostics import UpdateHistogram
    from .harness import read_grid_csv
    from .plots import plot_curves, plot_heatmap, plot_histogram
    from .trace import RunTrace

    source = Path(args.input)
    if not source.exists():
        raise ConfigError(f"no such file: {source}")
    out = _out_dir(args, "plot")
    out.mkdir(parents=True, exist_ok=True)
    target = out / (source.stem + ".svg")
    if args.kind == "heatmap":
        alphas, lambdas, matrix, metric = read_grid_csv(source)
        plot_heatmap(alphas, lambdas, matrix, target, metric=metric)
    elif args.kind == "curves":
        trace = RunTrace.from_csv(source)
        series = {"loss": trace.loss}
        if trace.err_inf is not None:
            series["distance to minimizer"] = trace.err_inf
        plot_curves(series, target, ylabel="value")
    else:
        hist = UpdateHistogram.from_csv(source)
        plot_histogram(hist, target)
    _print_files([target])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfopt",
        description="Optimizer experiments: update rules, invariance checks, "
                    "grids, and histograms.",
    )
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    p = sub.add_parser("quadratic", help="condition-number comparison runs")
    p.add_argument("--preset", default="fig1", help="preset name (fig1)")
    _add_common(p)
    p.set_defaults(func=_cmd_quadratic)

    p = sub.add_parser("theorem1",
                       help="gradient-rescaling iterate equivalence")
    p.add_argument("--preset", default="default")
    _add_common(p)
    p.set_defaults(func=_cmd_theorem1)

    p = sub.add_parser("restart-adagrad",
                       help="round-restarted run with per-round error bounds")
    p.add_argument("--preset", default="default")
    _add_common(p)
    p.set_defaults(func=_cmd_restart)

    p = sub.add_parser("regret", help="box-constrained regret inequality check")
    p.add_argument("--preset", default="default")
    p.add_argument("--eta-scale", type=float, default=1.0,
                   help="multiply the theoretical step constant (default 1)")
    _add_common(p)
    p.set_defaults(func=_cmd_regret)

    p = sub.add_parser("scalefree",
                       help="iterate invariance under gradient or loss scaling")
    p.add_argument("--preset", default="quad",
                   help="quad (flag-driven) or mlp-rescale")
    p.add_argument("--optimizer", default="adamw",
                   choices=("adam_l2", "adamw", "adamprox", "adamproxl2"))
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--scale", default="10,0.01",
                   help="comma-separated per-coordinate gradient factors")
    p.add_argument("--weight-decay", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(func=_cmd_scalefree)

    p = sub.add_parser("train-mlp", help="train the synthetic-data network")
    p.add_argument("--preset", default="default",
                   help="default or prox-pair")
    _add_common(p, config=True)
    p.set_defaults(func=_cmd_train_mlp)

    p = sub.add_parser("grid", help="(alpha, lambda) sweep with heatmap")
    p.add_argument("--preset", default="mlp-adamw",
                   help="mlp-adamw or loss-rescale")
    p.add_argument("--metric", default="final_loss",
                   choices=("final_loss", "final_error"))
    p.add_argument("--alphas", default=None,
                   help="override step-size axis, comma-separated")
    p.add_argument("--lambdas", default=None,
                   help="override weight-decay axis, comma-separated")
    _add_common(p, config=True)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("hist", help="update-magnitude histograms")
    p.add_argument("--preset", default="depth-sweep")
    _add_common(p, config=True)
    p.set_defaults(func=_cmd_hist)

    p = sub.add_parser("plot", help="re-render an SVG from a CSV artifact")
    p.add_argument("input", help="trace, grid, or histogram CSV")
    p.add_argument("--kind", required=True,
                   choices=("curves", "heatmap", "histogram"))
    _add_common(p)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure, distinct from usage errors
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
