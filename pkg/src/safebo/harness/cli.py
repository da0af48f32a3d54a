"""
Command line entry point.

    safebo run <config> [--out DIR] [--seed N] [--jobs K] [--no-plots]
    safebo audit <config> [--out DIR] [--seed N] [--jobs K]
    safebo replay <function-record> <config> [--out DIR] [--seed N] [--jobs K] [--no-plots]

Exit codes: 0 success, 2 configuration error, 3 invariant/assertion failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..safe_sets import InvalidStateError
from ..synth import RkhsFunction
from .config import ConfigError, ExperimentKind, parse_config
from .runner import InvariantError, bound_audit, run_experiment_batch, write_audit, write_batch

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3

log = logging.getLogger("safebo")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="safebo", description="Safe Bayesian optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, plots=True):
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if plots:
            p.add_argument("--no-plots", action="store_true", help="skip SVG output")

    common(sub.add_parser("run", help="run an optimization experiment"))
    sub.choices["run"].add_argument("config", type=Path)
    audit = sub.add_parser("audit", help="measure confidence-bound violations")
    audit.add_argument("config", type=Path)
    common(audit, plots=False)
    replay = sub.add_parser("replay", help="rerun a config on a saved function record")
    replay.add_argument("record", type=Path)
    replay.add_argument("config", type=Path)
    common(replay)
    return parser


def _load(args):
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    out = args.out if args.out is not None else Path(cfg.output_dir)
    return cfg, out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg, out = _load(args)
        if args.command == "audit":
            if cfg.kind is not ExperimentKind.BOUND_AUDIT:
                raise ConfigError(f"{args.config}: audit needs kind = BoundAudit")
            summary = bound_audit(cfg, jobs=args.jobs)
            write_audit(summary, out)
            for name in summary.schedules():
                log.info("%s: runs with a bound violation %.3f", name, summary.run_violation_frequency(name))
        else:
            if cfg.kind is ExperimentKind.BOUND_AUDIT:
                raise ConfigError(f"{args.config}: {args.command} needs an optimization experiment kind")
            functions = None
            if args.command == "replay":
                try:
                    functions = [RkhsFunction.from_record(args.record.read_text())]
                except (OSError, ValueError, KeyError) as err:
                    raise ConfigError(f"{args.record}: cannot load function record ({err})") from err
            result = run_experiment_batch(cfg, jobs=args.jobs, functions=functions)
            write_batch(result, out, plots=not args.no_plots)
            for m in result.summary.aggregates:
                if m.function_id == "ALL" and m.t == cfg.budget:
                    log.info("%s: mean simple regret %.4g, violations %d over %d runs",
                             m.algorithm, m.mean_simple_regret, m.total_violations, m.runs)
    except ConfigError as err:
        log.error("%s", err)
        return EXIT_CONFIG
    except (InvariantError, InvalidStateError, AssertionError) as err:
        log.error("invariant failure: %s", err)
        return EXIT_INVARIANT
    log.info("wrote results to %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
