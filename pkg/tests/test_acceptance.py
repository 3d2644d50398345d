"""Release gate: one test per advertised guarantee, one printed verdict each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Every test computes its quantities through the public presets or the
command line, then asserts at the stated tolerance.
"""

import time

import numpy as np

from sfopt import presets
from sfopt.cli import main
from sfopt.diagnostics import N_BINS, UpdateHistogram
from sfopt.harness import ExperimentConfig, MlpProblemConfig
from sfopt.mlp import MlpSpec, mlp_init, mlp_loss_grad
from sfopt.problems import gen_blobs
from sfopt.updates import AdamHyper, AdamState, adamprox_step, adamw_step
from sfopt.vectors import fd_gradient, rng_stream


def _verdict(n, passed, budget_s, elapsed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"criterion {n}: {status} - {detail} [{elapsed:.1f}s "
          f"of {budget_s:g}s budget]")
    return passed and elapsed < budget_s


def test_criterion_1_curvature_invariance_and_gd_failure():
    t0 = time.perf_counter()
    report = presets.run_fig1()
    pair_ok = report.pair_deviation <= 1e-9
    if report.gd_diverged:
        gd_ok = True
        gd_note = f"gd diverged at step {report.gd_steps_done}"
    else:
        gd_ok = report.gd_final_err >= 1e3 * report.adamw_final_err
        gd_note = (f"gd error {report.gd_final_err:.3e} vs adamw "
                   f"{report.adamw_final_err:.3e}")
    elapsed = time.perf_counter() - t0
    detail = (f"iterate deviation {report.pair_deviation:.3e} (tol 1e-9); "
              f"{gd_note}")
    assert _verdict(1, pair_ok and gd_ok, 1.0, elapsed, detail)


def test_criterion_2_gradient_rescaling_equivalence():
    t0 = time.perf_counter()
    report = presets.run_theorem1()
    elapsed = time.perf_counter() - t0
    detail = (f"max deviation {report.max_deviation:.3e} over "
              f"{len(report.runs)} runs (tol 1e-12)")
    assert _verdict(2, report.passed and report.max_deviation <= 1e-12,
                    1.0, elapsed, detail)


def test_criterion_3_decay_gap_identity_and_long_run_proximity():
    t0 = time.perf_counter()
    # part one: with zero gradient and zero first moment the per-coordinate
    # gap between the two decay styles is lam^2 eta^2 |x| / (1 + lam eta)
    rng = rng_stream(1729, 6)
    worst = 0.0
    total = 0
    for _ in range(20):
        state = AdamState(
            x=rng.uniform(-3.0, 3.0, 500),
            m=np.zeros(500),
            v=rng.uniform(0.0, 4.0, 500),
            t=int(rng.integers(1, 500)),
        )
        eta = float(rng.uniform(0.05, 1.5))
        lam = float(rng.uniform(0.0, 1.0))
        hyper = AdamHyper(alpha=1e-3, lam=lam)
        g = np.zeros(500)
        xw = adamw_step(state, hyper, g, eta).x
        xp = adamprox_step(state, hyper, g, eta).x
        predicted = lam**2 * eta**2 * np.abs(state.x) / (1.0 + lam * eta)
        worst = max(worst, float(np.max(np.abs(np.abs(xw - xp) - predicted))))
        total += state.x.size
    gap_ok = worst <= 1e-12 and total == 10_000

    # part two: whole training runs stay within one percent of each other
    pair = presets.run_prox_pair()
    close_ok = pair.rel_distance_l2 <= 0.01
    elapsed = time.perf_counter() - t0
    detail = (f"gap error {worst:.3e} over {total} states (tol 1e-12); "
              f"relative distance {pair.rel_distance_l2:.3e} after "
              f"{pair.steps} steps at lambda={pair.lam:g} (tol 1e-2)")
    assert _verdict(3, gap_ok and close_ok, 30.0, elapsed, detail)


def test_criterion_4_restart_contraction():
    t0 = time.perf_counter()
    report = presets.run_restart()
    con = report.contraction
    ok = bool(con.passed) and all(con.per_round_ok)
    elapsed = time.perf_counter() - t0
    pairs = ", ".join(f"{sq:.2e}<={b:.2e}"
                      for sq, b in zip(con.sq_errors, con.bounds))
    assert _verdict(4, ok, 5.0, elapsed,
                    f"per-round squared errors vs bounds: {pairs}")


def test_criterion_5_regret_bound():
    t0 = time.perf_counter()
    report = presets.run_regret()
    reg = report.regret
    ok = bool(reg.passed) and reg.max_violation <= 0.0
    elapsed = time.perf_counter() - t0
    assert _verdict(
        5, ok, 5.0, elapsed,
        f"max violation {reg.max_violation:.3f} over "
        f"{reg.violations.size} comparators (bound rhs {reg.rhs:.2f})")


def test_criterion_6_loss_multiplication(tmp_path):
    t0 = time.perf_counter()
    grids = presets.run_rescale_grids(jobs=1, out_dir=tmp_path)
    argmin_ok = bool(grids.argmin_identical)

    scale = presets.run_scalefree_mlp()
    adamw_devs = [dev for (opt, _), dev in scale.deviations.items()
                  if opt == "adamw"]
    adamw_ok = bool(scale.adamw_passed) and max(adamw_devs) <= 1e-3
    l2_devs = [dev for (opt, _), dev in scale.deviations.items()
               if opt == "adam_l2"]
    contrast_ok = bool(scale.adam_l2_contrast) and max(l2_devs) > 1e-1
    elapsed = time.perf_counter() - t0
    detail = (f"argmin identical across x1/x10/x100: {argmin_ok} "
              f"(alpha={grids.best_alpha:g}, lambda={grids.best_lambda:g}); "
              f"decoupled deviation {max(adamw_devs):.3e} (tol 1e-3); "
              f"coupled deviation {max(l2_devs):.3e} (floor 1e-1)")
    assert _verdict(6, argmin_ok and adamw_ok and contrast_ok,
                    600.0, elapsed, detail)


def test_criterion_7_dispersion_trend(tmp_path):
    t0 = time.perf_counter()
    report = presets.run_hist_depth_sweep(out_dir=tmp_path)
    diffs = [report.iqr[("adam_l2", d)] - report.iqr[("adamw", d)]
             for d in report.depths]
    positive = all(diff > 0 for diff in diffs)
    nondecreasing = all(b >= a for a, b in zip(diffs, diffs[1:]))

    hist_files = [p for p in report.files
                  if p.suffix == ".csv" and p.name.startswith("hist")]
    contract_ok = len(hist_files) == 2 * len(report.depths)
    for path in hist_files:
        UpdateHistogram.from_csv(path)  # raises unless edges match exactly
        lines = path.read_text().splitlines()
        contract_ok = contract_ok and len(lines) == N_BINS + 1
    elapsed = time.perf_counter() - t0
    detail = (f"spread differences {[f'{d:+.2f}' for d in diffs]} octaves at "
              f"depths {list(report.depths)}; {len(hist_files)} histogram "
              f"files match the 29-bin contract: {contract_ok}")
    assert _verdict(7, bool(report.trend_ok) and positive and nondecreasing
                    and contract_ok, 600.0, elapsed, detail)


def test_criterion_8_gradient_correctness():
    t0 = time.perf_counter()
    spec = MlpSpec((16, 16, 16, 3), init_seed=7)
    data = gen_blobs(7, n_classes=3, dim=16, n_per_class=8)
    inputs, labels = data.inputs, data.labels
    base = mlp_init(spec)
    rng = rng_stream(7, 5)
    worst = 0.0
    for _ in range(10):
        params = base + 0.3 * rng.standard_normal(base.size)
        fd = fd_gradient(
            lambda p: mlp_loss_grad(spec, p, inputs, labels)[0],
            params, h=1e-5)
        _, grad = mlp_loss_grad(spec, params, inputs, labels)
        rel = np.max(np.abs(fd - grad)) / max(np.max(np.abs(grad)), 1e-12)
        worst = max(worst, float(rel))
    elapsed = time.perf_counter() - t0
    assert _verdict(
        8, worst <= 1e-5, 10.0, elapsed,
        f"worst relative error {worst:.3e} over 10 points, "
        f"{base.size} parameters (tol 1e-5)")


def test_criterion_9_determinism_and_jobs_parity(tmp_path):
    t0 = time.perf_counter()
    # re-running a preset reproduces its artifact byte for byte
    presets.run_theorem1(out_dir=tmp_path / "a")
    presets.run_theorem1(out_dir=tmp_path / "b")
    rerun_ok = ((tmp_path / "a" / "theorem1.csv").read_bytes()
                == (tmp_path / "b" / "theorem1.csv").read_bytes())

    # a parallel sweep matches the serial one byte for byte
    cfg = ExperimentConfig(
        problem=MlpProblemConfig(depth=2, width=8, n_classes=2, dim=4,
                                 n_per_class=40, batch_size=16),
        optimizer={"name": "adamw"},
        seed=7,
        steps=20,
    )
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(cfg.to_json())
    argv = ["grid", "--config", str(cfg_path),
            "--alphas", "5e-4,1e-3", "--lambdas", "0,1e-4"]
    assert main(argv + ["--jobs", "1", "--out", str(tmp_path / "j1")]) == 0
    assert main(argv + ["--jobs", "8", "--out", str(tmp_path / "j8")]) == 0
    parity_ok = ((tmp_path / "j1" / "grid.csv").read_bytes()
                 == (tmp_path / "j8" / "grid.csv").read_bytes())
    elapsed = time.perf_counter() - t0
    assert _verdict(
        9, rerun_ok and parity_ok, 600.0, elapsed,
        f"preset rerun byte-identical: {rerun_ok}; "
        f"grid --jobs 1 vs --jobs 8 byte-identical: {parity_ok}")
