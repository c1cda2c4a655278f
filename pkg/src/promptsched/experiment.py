"""Runs, sweeps and their CSV outputs.

Every CSV is comma separated with a header row, '.' decimals, LF line
endings and a fixed row order. Floats are written with ``repr`` so reruns
are byte-identical. Wall-clock numbers go to separate ``*timing.csv``
files, since they can never repeat exactly.
"""

from __future__ import annotations

import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import checkpoint
from .config import ConfigError, ExperimentConfig, check_grid, config_hash, resolved_text
from .fusion import gates_csv
from .scheduler import weights_csv
from .tasks import generate_tasks
from .trainer import MetricsReport, TrainingDiverged, train, transfer_gain

logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ("temperature", "task_count")


@dataclass
class RunResult:
    report: MetricsReport
    model: object = None
    baseline_report: MetricsReport | None = None
    transfer_gain: float = math.nan
    config: ExperimentConfig | None = None


def build_suite(cfg: ExperimentConfig):
    s = cfg.suite
    return generate_tasks(s.T, cfg.seed, s.profile, n_heldout=s.n_heldout, seq_len=s.seq_len,
                          vocab_size=cfg.encoder.vocab_size, n_train=s.n_train, n_val=s.n_val,
                          n_test=s.n_test)


def run_experiment(cfg: ExperimentConfig, with_transfer: bool = True) -> RunResult:
    """Train the scheduled model; with held-out tasks, also the baseline and the transfer gain."""
    suite = build_suite(cfg)
    tc = cfg.train_config()
    model, report = train(tc, suite)
    result = RunResult(report, model, config=cfg)
    if with_transfer and suite.heldout:
        bcfg = cfg.train_config(K=cfg.baseline.K, pin_gate=cfg.baseline.pin_gate, pin_schedule=False)
        baseline, result.baseline_report = train(bcfg, suite)
        result.transfer_gain = transfer_gain(model, suite.heldout, baseline, tc, steps=cfg.transfer.steps,
                                             batch_size=cfg.transfer.batch_size,
                                             learning_rate=cfg.transfer.learning_rate)
        report.transfer_gain = result.transfer_gain
    return result


# --------------------------------------------------------------------------
# CSV writers


def _f(x) -> str:
    return repr(float(x))


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def metrics_csv(report: MetricsReport) -> str:
    out = io.StringIO()
    out.write("task,name,val_accuracy,test_accuracy,mean_gate,final_entropy,final_lambda,final_loss\n")
    T = len(report.task_names)
    lambdas = report.lambda_trace[-1] if report.lambda_trace else [1.0] * T
    losses = report.loss_trace[-1] if report.loss_trace else [math.nan] * T
    for t, name in enumerate(report.task_names):
        out.write(f"{t},{name},{_f(report.val_accuracy[t])},{_f(report.test_accuracy[t])},"
                  f"{_f(report.mean_gate[t])},{_f(report.final_entropy[t])},{_f(lambdas[t])},{_f(losses[t])}\n")
    out.write(f"macro,macro,{_f(report.macro_val)},{_f(report.macro_test)},{_f(np.mean(report.mean_gate))},"
              f"{_f(report.mean_entropy)},{_f(np.mean(lambdas))},{_f(np.mean(losses))}\n")
    return out.getvalue()


def summary_csv(result: RunResult) -> str:
    r, b = result.report, result.baseline_report
    rows = [
        ("macro_val_accuracy", r.macro_val),
        ("macro_test_accuracy", r.macro_test),
        ("mean_scheduling_entropy", r.mean_entropy),
        ("baseline_macro_val_accuracy", b.macro_val if b else math.nan),
        ("baseline_macro_test_accuracy", b.macro_test if b else math.nan),
        ("transfer_gain", result.transfer_gain),
    ]
    return "metric,value\n" + "".join(f"{k},{_f(v)}\n" for k, v in rows)


def trace_csv(report: MetricsReport) -> str:
    """Per step and task: loss, lambda and scheduling entropy after the update."""
    out = io.StringIO()
    out.write("step,task,loss,lambda,entropy\n")
    for step, (losses, lams, ents) in enumerate(zip(report.loss_trace, report.lambda_trace, report.entropy_trace)):
        for t in range(len(losses)):
            out.write(f"{step},{t},{_f(losses[t])},{_f(lams[t])},{_f(ents[t])}\n")
    return out.getvalue()


def write_run(out_dir, cfg: ExperimentConfig, result: RunResult) -> list[str]:
    """Write every run output into ``out_dir``; returns the file names written."""
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "resolved_config.txt": resolved_text(cfg),
        "metrics.csv": metrics_csv(result.report),
        "summary.csv": summary_csv(result),
        "trace.csv": trace_csv(result.report),
        "gates.csv": gates_csv(result.report.gate_rows),
        "timing.csv": f"phase,seconds\ntrain,{_f(result.report.wall_seconds)}\n",
    }
    if result.model is not None:
        files["scheduler_weights.csv"] = weights_csv(result.model.schedule)
        checkpoint.save_checkpoint(os.path.join(out_dir, "checkpoint"), result.model.named_parameters(),
                                   config_hash(cfg), len(result.report.loss_trace))
    for name, text in files.items():
        _write(os.path.join(out_dir, name), text)
    return sorted(files) + (["checkpoint"] if result.model is not None else [])


def write_partial(out_dir, cfg: ExperimentConfig, exc: TrainingDiverged) -> None:
    """Traces recorded up to a divergence."""
    os.makedirs(out_dir, exist_ok=True)
    _write(os.path.join(out_dir, "resolved_config.txt"), resolved_text(cfg))
    _write(os.path.join(out_dir, "trace.csv"), trace_csv(exc.trace))


# --------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    repeats: int
    base: ExperimentConfig

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if self.repeats < 1:
            raise ConfigError(f"sweep.repeats: must be >= 1, got {self.repeats}")
        if self.variable == "temperature":
            check_grid("sweep.temperatures", self.grid, positive=True)
        else:
            check_grid("sweep.task_counts", self.grid, integer=True)

    def points(self):
        """(grid index, value, seed, config) in grid-then-seed order."""
        base = self.base
        for i, value in enumerate(self.grid):
            for r in range(self.repeats):
                seed = base.seed + r
                if self.variable == "temperature":
                    cfg = replace(base, seed=seed, train=replace(base.train, tau=float(value)))
                else:
                    cfg = replace(base, seed=seed, suite=replace(base.suite, T=int(value)))
                yield i, value, seed, cfg


@dataclass
class SweepRow:
    value: object
    seed: int
    macro_val: float
    macro_test: float
    transfer_gain: float
    mean_entropy: float
    wall_seconds: float


def _sweep_point(args):
    value, seed, cfg, with_transfer = args
    result = run_experiment(cfg, with_transfer=with_transfer)
    r = result.report
    return SweepRow(value, seed, r.macro_val, r.macro_test, result.transfer_gain, r.mean_entropy, r.wall_seconds)


def run_sweep(spec: SweepSpec, workers: int = 1, with_transfer: bool = False) -> list[SweepRow]:
    """Train every (grid value, seed) point; rows come back in grid-then-seed order."""
    jobs = [(value, seed, cfg, with_transfer) for _, value, seed, cfg in spec.points()]
    for _, _, cfg, _ in jobs:
        cfg.validate()
    if workers <= 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map yields in submission order whatever the completion order
        return list(pool.map(_sweep_point, jobs))


SWEEP_HEADER = ("row_type,value,seed,macro_val_accuracy,macro_val_accuracy_std,macro_test_accuracy,"
                "macro_test_accuracy_std,transfer_gain,transfer_gain_std,mean_entropy,mean_entropy_std")


def _value(v) -> str:
    return _f(v) if isinstance(v, float) else str(v)


def sweep_csv(spec: SweepSpec, rows: list[SweepRow]) -> str:
    """Per-run rows, then one aggregate row (mean and population std over seeds) per grid value."""
    out = io.StringIO()
    out.write(SWEEP_HEADER + "\n")
    for row in rows:
        out.write(f"run,{_value(row.value)},{row.seed},{_f(row.macro_val)},,{_f(row.macro_test)},,"
                  f"{_f(row.transfer_gain)},,{_f(row.mean_entropy)},\n")
    for row_group in aggregate(spec, rows):
        value, stats = row_group
        cells = ",".join(f"{_f(m)},{_f(s)}" for m, s in stats)
        out.write(f"aggregate,{_value(value)},,{cells}\n")
    return out.getvalue()


def aggregate(spec: SweepSpec, rows: list[SweepRow]):
    """[(grid value, [(mean, std) for val, test, gain, entropy])] in grid order."""
    out = []
    for value in spec.grid:
        group = [r for r in rows if r.value == value]
        stats = []
        for attr in ("macro_val", "macro_test", "transfer_gain", "mean_entropy"):
            xs = np.array([getattr(r, attr) for r in group], dtype=np.float64)
            stats.append((float(xs.mean()), float(xs.std())))
        out.append((value, stats))
    return out


def sweep_timing_csv(rows: list[SweepRow]) -> str:
    return "value,seed,seconds\n" + "".join(f"{_value(r.value)},{r.seed},{_f(r.wall_seconds)}\n" for r in rows)


def write_sweep(out_dir, spec: SweepSpec, rows: list[SweepRow]) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "resolved_config.txt": resolved_text(spec.base),
        "sweep.csv": sweep_csv(spec, rows),
        "sweep_timing.csv": sweep_timing_csv(rows),
    }
    for name, text in files.items():
        _write(os.path.join(out_dir, name), text)
    return sorted(files)


def parse_sweep(path) -> tuple[list[dict], list[dict]]:
    """Read a sweep.csv back as (run rows, aggregate rows) of floats."""
    import csv

    runs, aggs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            kind = rec.pop("row_type")
            parsed = {k: (float(v) if v != "" else None) for k, v in rec.items()}
            (runs if kind == "run" else aggs).append(parsed)
    return runs, aggs
