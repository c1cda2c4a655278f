import csv
import os
from dataclasses import replace
import subprocess
import sys

import numpy as np
import pytest

from promptsched import checkpoint
from promptsched.cli import main
from promptsched.config import parse_config
from promptsched.experiment import SweepSpec, parse_sweep, run_experiment, run_sweep, sweep_csv

TINY = """
suite.T = 2
suite.n_heldout = 1
suite.n_train = 32
suite.n_val = 16
suite.n_test = 16
train.steps = 4
train.batch_size = 8
train.K = 2
train.eval_every = 2
encoder.d = 8
encoder.n_heads = 2
encoder.n_layers = 1
encoder.m = 2
transfer.steps = 3
transfer.batch_size = 8
sweep.temperatures = 0.5, 1.0
sweep.task_counts = 1, 2
sweep.repeats = 2
"""


@pytest.fixture
def conf(tmp_path):
    path = tmp_path / "tiny.conf"
    path.write_text(TINY)
    return str(path)


def _cli(*args):
    env = dict(os.environ, PYTHONPATH=os.pathsep.join(sys.path))
    return subprocess.run([sys.executable, "-m", "promptsched.cli", *args], capture_output=True, text=True, env=env)


def test_run_writes_all_declared_outputs(conf, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "--config", conf, "--out", str(out)]) == 0
    for name in ("metrics.csv", "summary.csv", "trace.csv", "gates.csv", "scheduler_weights.csv",
                 "resolved_config.txt", "timing.csv", "checkpoint/manifest.txt"):
        assert (out / name).exists(), name
    rows = list(csv.DictReader(open(out / "metrics.csv")))
    assert [r["task"] for r in rows] == ["0", "1", "macro"]
    gates = (out / "gates.csv").read_text().splitlines()
    assert gates[0] == "step,task,mean_gate,entropy_of_weights" and len(gates) == 1 + 3 * 2
    assert b"\r" not in (out / "metrics.csv").read_bytes()


def test_rerun_is_byte_identical(conf, tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--config", conf, "--out", str(tmp_path / d)]) == 0
    for name in ("metrics.csv", "summary.csv", "trace.csv", "gates.csv", "scheduler_weights.csv",
                 "resolved_config.txt", "checkpoint/manifest.txt", "checkpoint/pool.prompts.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_resolved_echo_reproduces_the_run(conf, tmp_path):
    assert main(["run", "--config", conf, "--out", str(tmp_path / "a")]) == 0
    echo = str(tmp_path / "a" / "resolved_config.txt")
    assert main(["run", "--config", echo, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_zero_steps_gives_chance_level(conf, tmp_path):
    path = tmp_path / "zero.conf"
    path.write_text(TINY.replace("train.steps = 4", "train.steps = 0").replace("suite.n_val = 16", "suite.n_val = 400"))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "z")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "z" / "metrics.csv")))
    for r in rows[:-1]:
        assert abs(float(r["val_accuracy"]) - 0.5) <= 4 * np.sqrt(0.25 / 400)


def test_checkpoint_matches_model_and_inspects(conf, tmp_path, capsys):
    out = tmp_path / "run"
    main(["run", "--config", conf, "--out", str(out)])
    arrays, meta = checkpoint.load_checkpoint(out / "checkpoint")
    assert meta["step"] == 4 and "pool.prompts" in arrays
    capsys.readouterr()
    assert main(["inspect-checkpoint", str(out / "checkpoint")]) == 0
    text = capsys.readouterr().out
    assert "pool.prompts 2x2x8 32" in text and text.splitlines()[-1].startswith("total ")


def test_seed_flag_overrides_config(conf, tmp_path):
    main(["run", "--config", conf, "--seed", "1", "--out", str(tmp_path / "s1")])
    assert "seed = 1" in (tmp_path / "s1" / "resolved_config.txt").read_text()


def test_sweeps_write_grid_then_seed_rows(conf, tmp_path):
    out = tmp_path / "sw"
    assert main(["sweep-temp", "--config", conf, "--out", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("row_type,value,seed,macro_val_accuracy,macro_val_accuracy_std")
    kinds = [(l.split(",")[0], l.split(",")[1], l.split(",")[2]) for l in lines[1:]]
    assert kinds == [("run", "0.5", "0"), ("run", "0.5", "1"), ("run", "1.0", "0"), ("run", "1.0", "1"),
                     ("aggregate", "0.5", ""), ("aggregate", "1.0", "")]
    assert main(["sweep-tasks", "--config", conf, "--out", str(tmp_path / "st")]) == 0
    runs, aggs = parse_sweep(tmp_path / "st" / "sweep.csv")
    assert [r["value"] for r in runs] == [1, 1, 2, 2] and len(aggs) == 2


def test_parallel_sweep_matches_sequential(conf):
    cfg = parse_config(open(conf).read())
    spec = SweepSpec("temperature", cfg.sweep.temperatures, 2, cfg)
    seq = sweep_csv(spec, run_sweep(spec, workers=1))
    par = sweep_csv(spec, run_sweep(spec, workers=2))
    assert seq == par


def test_single_value_sweep_equals_repeated_runs(conf):
    cfg = parse_config(open(conf).read())
    spec = SweepSpec("temperature", (0.9,), 2, cfg)
    rows = run_sweep(spec)
    for row, seed in zip(rows, (0, 1)):
        r = run_experiment(replace(cfg, seed=seed, train=replace(cfg.train, tau=0.9)), with_transfer=False)
        assert row.macro_val == r.report.macro_val and row.mean_entropy == r.report.mean_entropy


@pytest.mark.parametrize("args, fragment", [
    (["run", "--config", "/no/such/file"], "cannot read"),
    (["sweep-temp", "--workers", "0"], "--workers"),
    (["bogus"], "invalid choice"),
    (["run", "--seed", "-3"], "--seed"),
    (["inspect-checkpoint", "/no/such/dir"], "cannot read"),
])
def test_failures_exit_nonzero_with_one_prefixed_line(args, fragment):
    proc = _cli(*args)
    assert proc.returncode != 0
    lines = proc.stderr.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("promptsched: error:") and fragment in lines[0]


def test_invalid_config_value_is_field_level(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("train.steps = many\n")
    proc = _cli("run", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert proc.returncode == 2 and "train.steps" in proc.stderr


def test_bad_sweep_grid_rejected_before_any_run(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("sweep.temperatures = 0.5, -0.1\n")
    proc = _cli("sweep-temp", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert proc.returncode == 2 and "sweep.temperatures" in proc.stderr
    assert not (tmp_path / "o").exists()


def test_divergence_exits_nonzero_and_keeps_partial_traces(conf, tmp_path):
    path = tmp_path / "div.conf"
    path.write_text(TINY.replace("train.steps = 4", "train.steps = 30") + "train.optimizer = sgd\ntrain.learning_rate = 1e200\n")
    proc = _cli("run", "--config", str(path), "--out", str(tmp_path / "d"))
    assert proc.returncode == 3
    lines = proc.stderr.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("promptsched: error: diverged")
    assert (tmp_path / "d" / "trace.csv").exists()


def test_grad_check_subcommand(capsys):
    assert main(["grad-check"]) == 0
    assert "max relative error" in capsys.readouterr().out
