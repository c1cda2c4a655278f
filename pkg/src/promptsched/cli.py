"""Command line entry point: ``promptsched <subcommand> [flags]``.

Failures print exactly one line starting with ``promptsched: error:`` to
stderr and exit nonzero (2 for bad input, 3 for divergence, 4 for a failed
gradient check).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import checkpoint
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import (SweepSpec, run_experiment, run_sweep, write_partial, write_run,
                         write_sweep)
from .trainer import TrainingDiverged

PREFIX = "promptsched: error:"
EXIT_USAGE, EXIT_DIVERGED, EXIT_GRADCHECK = 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message.replace("\n", " "))


def _parser():
    p = _Parser(prog="promptsched", description="Scheduled soft-prompt multi-task experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--config", metavar="PATH", help="key = value config file (defaults if omitted)")
        sp.add_argument("--seed", type=int, metavar="N", help="override the config seed")
        sp.add_argument("--out", metavar="DIR", default=out_default, help="output directory")

    common(sub.add_parser("run", help="train once and write metrics, traces and a checkpoint"), "out/run")
    for name, out in (("sweep-temp", "out/sweep-temp"), ("sweep-tasks", "out/sweep-tasks")):
        sp = sub.add_parser(name, help=f"{'temperature' if name == 'sweep-temp' else 'task count'} sweep")
        common(sp, out)
        sp.add_argument("--workers", type=int, default=1, metavar="N", help="parallel worker processes")
        sp.add_argument("--transfer", action="store_true", help="also train baselines and measure transfer gain")
    ic = sub.add_parser("inspect-checkpoint", help="print a checkpoint manifest")
    ic.add_argument("path", metavar="DIR")
    gc = sub.add_parser("grad-check", help="finite-difference check of the full pipeline")
    gc.add_argument("--seed", type=int, default=0, metavar="N")
    gc.add_argument("--epsilon", type=float, default=1e-5)
    gc.add_argument("--tolerance", type=float, default=1e-6)
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        cfg = replace(cfg, seed=args.seed).validate()
    return cfg


def cmd_run(args):
    cfg = _config(args)
    try:
        result = run_experiment(cfg)
    except TrainingDiverged as exc:
        write_partial(args.out, cfg, exc)
        print(f"{PREFIX} diverged: {exc}; partial traces in {args.out}", file=sys.stderr)
        return EXIT_DIVERGED
    written = write_run(args.out, cfg, result)
    r = result.report
    print(f"macro val {r.macro_val:.4f}  macro test {r.macro_test:.4f}  transfer gain {result.transfer_gain:.4f}")
    print(f"wrote {', '.join(written)} to {args.out}")
    return 0


def cmd_sweep(args, variable):
    cfg = _config(args)
    if args.workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {args.workers}")
    grid = cfg.sweep.temperatures if variable == "temperature" else cfg.sweep.task_counts
    spec = SweepSpec(variable, tuple(grid), cfg.sweep.repeats, cfg)
    try:
        rows = run_sweep(spec, workers=args.workers, with_transfer=args.transfer)
    except TrainingDiverged as exc:
        print(f"{PREFIX} diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    written = write_sweep(args.out, spec, rows)
    print(f"{len(rows)} runs; wrote {', '.join(written)} to {args.out}")
    return 0


def cmd_inspect(args):
    meta = checkpoint.read_manifest(args.path)
    print(f"config_hash {meta['config_hash']}")
    print(f"step {meta['step']}")
    total = 0
    for name, shape in sorted(meta["shapes"].items()):
        n = 1
        for s in shape:
            n *= s
        total += n
        print(f"{name} {'x'.join(str(s) for s in shape)} {n}")
    print(f"total {total}")
    return 0


def cmd_grad_check(args):
    from .gradcheck import pipeline_grad_check

    err = pipeline_grad_check(seed=args.seed, epsilon=args.epsilon)
    ok = err <= args.tolerance
    print(f"max relative error {err:.3e} ({'ok' if ok else 'FAIL'} at tolerance {args.tolerance:g})")
    if not ok:
        print(f"{PREFIX} gradient check failed: {err:.3e} > {args.tolerance:g}", file=sys.stderr)
        return EXIT_GRADCHECK
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PROMPTSCHED_LOG", "WARNING"), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep-temp":
            return cmd_sweep(args, "temperature")
        if args.command == "sweep-tasks":
            return cmd_sweep(args, "task_count")
        if args.command == "inspect-checkpoint":
            return cmd_inspect(args)
        return cmd_grad_check(args)
    except (ConfigError, checkpoint.CheckpointError, ValueError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"{PREFIX} {msg}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"{PREFIX} {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
