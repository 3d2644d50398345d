"""Command-line behavior, exercised in-process through ``main(argv)``."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from sfopt.cli import main
from sfopt.diagnostics import UpdateHistogram
from sfopt.harness import (
    ExperimentConfig,
    MlpProblemConfig,
    QuadraticProblemConfig,
    RecordConfig,
    read_grid_csv,
)
from sfopt.trace import RunTrace


def _tiny_mlp_cfg(**overrides):
    base = dict(
        problem=MlpProblemConfig(depth=2, width=8, n_classes=2, dim=4,
                                 n_per_class=40, batch_size=16),
        optimizer={"name": "adamw", "alpha": 1e-3, "weight_decay": 1e-4},
        seed=7,
        steps=8,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _write_cfg(path, cfg):
    path.write_text(cfg.to_json())
    return str(path)


def _svg_ok(path):
    assert path.exists()
    head = path.read_bytes()[:512]
    assert b"<svg" in head or b"<?xml" in head


# ---------------------------------------------------------------------------
# argparse-level usage errors
# ---------------------------------------------------------------------------

def test_help_exits_zero_and_lists_verbs(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for verb in ("quadratic", "theorem1", "restart-adagrad", "regret",
                 "scalefree", "train-mlp", "grid", "hist", "plot"):
        assert verb in out


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["plot", "x.csv", "--kind", "pie"],
    ["theorem1", "--seed", "not-a-number"],
])
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_unknown_preset_is_a_config_error(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["quadratic", "--preset", "nope", "--out", str(out)])
    assert rc == 2
    assert "unknown preset" in capsys.readouterr().err
    assert not out.exists()


def test_bad_scale_flag(tmp_path, capsys):
    rc = main(["scalefree", "--preset", "quad", "--scale", "1,abc"])
    assert rc == 2
    assert "--scale" in capsys.readouterr().err

    rc = main(["scalefree", "--preset", "quad", "--scale=-1,2"])
    assert rc == 2
    assert "positive" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# experiment verbs
# ---------------------------------------------------------------------------

def test_quadratic_fig1(tmp_path, capsys):
    out = tmp_path / "fig1"
    rc = main(["quadratic", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "iterate deviation" in text
    assert "gd" in text
    assert (out / "trace_adamw.csv").exists()
    assert (out / "trace_gd.csv").exists()
    _svg_ok(out / "curves_fig1.svg")
    trace = RunTrace.from_csv(out / "trace_adamw.csv")
    assert trace.n_steps >= 1


def test_theorem1_writes_csv_and_reruns_identically(tmp_path, capsys):
    out1 = tmp_path / "a"
    rc = main(["theorem1", "--out", str(out1)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "pass" in text
    path1 = out1 / "theorem1.csv"
    assert path1.exists()
    first = path1.read_text().splitlines()[0]
    assert first == "optimizer,lambda,max_rel_dev,tol,passed"

    out2 = tmp_path / "b"
    assert main(["theorem1", "--out", str(out2)]) == 0
    assert (out2 / "theorem1.csv").read_bytes() == path1.read_bytes()


def test_restart_adagrad(tmp_path, capsys):
    out = tmp_path / "r"
    rc = main(["restart-adagrad", "--out", str(out)])
    assert rc == 0
    assert "contraction: pass" in capsys.readouterr().out
    lines = (out / "restart.csv").read_text().splitlines()
    assert lines[0] == "round,sq_error,bound,ok"
    assert len(lines) == 6  # header plus five rounds


def test_regret_pass_and_detuned_violation(tmp_path, capsys):
    rc = main(["regret", "--out", str(tmp_path / "ok")])
    assert rc == 0
    assert "pass" in capsys.readouterr().out
    assert (tmp_path / "ok" / "regret.csv").exists()

    # a 10x too-large step constant breaks the inequality but still runs
    rc = main(["regret", "--eta-scale", "10", "--out", str(tmp_path / "hot")])
    assert rc == 0
    assert "VIOLATED" in capsys.readouterr().out


def test_scalefree_quad_flags(capsys):
    rc = main(["scalefree", "--preset", "quad"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "max deviation" in text
    assert "pass" in text

    # coupled decay is not scale invariant; the verb reports FAIL yet exits 0
    rc = main(["scalefree", "--preset", "quad", "--optimizer", "adam_l2"])
    assert rc == 0
    assert "FAIL" in capsys.readouterr().out


def test_train_mlp_with_config(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", _tiny_mlp_cfg())
    out = tmp_path / "run"
    rc = main(["train-mlp", "--config", cfg_path, "--out", str(out)])
    assert rc == 0
    assert "final loss" in capsys.readouterr().out
    trace = RunTrace.from_csv(out / "trace.csv")
    assert trace.n_steps == 8


def test_train_mlp_rejects_bad_config(tmp_path, capsys):
    data = _tiny_mlp_cfg().to_dict()
    data["bogus"] = 1
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps(data))
    out = tmp_path / "run"
    rc = main(["train-mlp", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 2
    assert "unknown keys" in capsys.readouterr().err
    assert not out.exists()


def test_hist_with_config(tmp_path, capsys):
    cfg = _tiny_mlp_cfg(record=RecordConfig(histogram_epochs=(1, 2)))
    cfg_path = _write_cfg(tmp_path / "cfg.json", cfg)
    out = tmp_path / "h"
    rc = main(["hist", "--config", cfg_path, "--out", str(out)])
    assert rc == 0
    assert "epoch 1" in capsys.readouterr().out
    # [DERIVED] 4 steps per epoch times 130 parameters = 520 magnitudes
    for epoch in (1, 2):
        hist = UpdateHistogram.from_csv(out / f"hist_adamw_{epoch}.csv")
        assert hist.total == 520


def test_hist_config_without_epochs(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path / "cfg.json", _tiny_mlp_cfg())
    out = tmp_path / "h"
    rc = main(["hist", "--config", cfg_path, "--out", str(out)])
    assert rc == 2
    assert "histogram" in capsys.readouterr().err
    assert not out.exists()


def test_grid_config_with_axis_overrides(tmp_path, capsys):
    cfg = ExperimentConfig(
        problem=QuadraticProblemConfig(h_diag=(1.0, 4.0), b=(-1.0, 2.0)),
        optimizer={"name": "adamw"},
        seed=7,
        steps=40,
        x0=(1.0, -1.0),
    )
    cfg_path = _write_cfg(tmp_path / "cfg.json", cfg)
    out = tmp_path / "g"
    rc = main(["grid", "--config", cfg_path, "--alphas", "0.02,0.05",
               "--lambdas", "0,0.001", "--metric", "final_error",
               "--out", str(out)])
    assert rc == 0
    assert "best cell" in capsys.readouterr().out
    alphas, lambdas, matrix, metric = read_grid_csv(out / "grid.csv")
    assert alphas == (0.02, 0.05)
    assert lambdas == (0.0, 0.001)
    assert matrix.shape == (2, 2)
    assert metric == "final_error"
    _svg_ok(out / "grid.svg")


def test_grid_seed_changes_results_and_reruns_are_identical(tmp_path):
    argv = ["grid", "--alphas", "1e-3", "--lambdas", "1e-4"]
    outs = [tmp_path / name for name in ("s11", "s11b", "s12")]
    for out, seed in zip(outs, ("11", "11", "12")):
        assert main(argv + ["--seed", seed, "--out", str(out)]) == 0
    first = (outs[0] / "grid.csv").read_bytes()
    assert (outs[1] / "grid.csv").read_bytes() == first
    assert (outs[2] / "grid.csv").read_bytes() != first


# ---------------------------------------------------------------------------
# plot verb
# ---------------------------------------------------------------------------

def test_plot_curves(tmp_path):
    trace = RunTrace(
        steps=np.arange(1, 6),
        eta=np.full(5, 0.1),
        loss=np.array([5.0, 3.0, 2.0, 1.5, 1.2]),
        err_inf=np.array([1.0, 0.8, 0.5, 0.3, 0.2]),
    )
    source = tmp_path / "trace.csv"
    trace.to_csv(source)
    out = tmp_path / "p"
    assert main(["plot", str(source), "--kind", "curves",
                 "--out", str(out)]) == 0
    _svg_ok(out / "trace.svg")


def test_plot_heatmap(tmp_path):
    source = tmp_path / "grid.csv"
    source.write_text(
        "alpha,lambda,final_loss,status\r\n"
        "0.001,0,1.5,ok\r\n"
        "0.001,0.0001,2.5,ok\r\n"
        "0.01,0,0.5,ok\r\n"
        "0.01,0.0001,3.5,ok\r\n"
    )
    out = tmp_path / "p"
    assert main(["plot", str(source), "--kind", "heatmap",
                 "--out", str(out)]) == 0
    _svg_ok(out / "grid.svg")


def test_plot_histogram(tmp_path):
    hist = UpdateHistogram().add(np.array([0.0, 0.2, 0.3, 0.5, 1.5]))
    source = tmp_path / "hist.csv"
    hist.to_csv(source)
    out = tmp_path / "p"
    assert main(["plot", str(source), "--kind", "histogram",
                 "--out", str(out)]) == 0
    _svg_ok(out / "hist.svg")


def test_plot_missing_input(tmp_path, capsys):
    rc = main(["plot", str(tmp_path / "gone.csv"), "--kind", "curves",
               "--out", str(tmp_path / "p")])
    assert rc == 2
    assert "no such file" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# installed console script
# ---------------------------------------------------------------------------

def test_console_script_smoke():
    exe = shutil.which("sfopt")
    assert exe is not None, "console script 'sfopt' is not on PATH"
    proc = subprocess.run([exe, "--help"], capture_output=True, timeout=60)
    assert proc.returncode == 0
    assert b"VERB" in proc.stdout
