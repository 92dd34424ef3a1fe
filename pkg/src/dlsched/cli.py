"""Command-line experiment runner.

Example::

    dlsched --synthetic --jobs 100 --servers 20 --algo wf --algo obta --algo ocwf-acc \\
        --alpha 0 --alpha 2 --util 0.75 --seed 0 --seed 1 --out results/
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .report import ConfigError, ExperimentConfig, run_experiment
from .simulator import ALGORITHMS
from .workload import DEFAULT_COLUMNS, SyntheticConfig, TraceError

log = logging.getLogger("dlsched")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dlsched", description="Simulate locality-aware task assignment on a trace.")
    ap.add_argument("--algo", action="append", choices=ALGORITHMS, required=True,
                    help="algorithm to run (repeatable)")
    ap.add_argument("--servers", type=int, default=100, help="number of servers M (default 100)")
    ap.add_argument("--alpha", action="append", type=float, help="Zipf skew (repeatable, default 0)")
    ap.add_argument("--util", action="append", type=float, help="target utilization in (0, 1] (repeatable, default 0.5)")
    ap.add_argument("--seed", action="append", type=int, help="random seed (repeatable, default 0)")
    ap.add_argument("--p-min", type=int, default=8, help="fewest available servers per group")
    ap.add_argument("--p-max", type=int, default=12, help="most available servers per group")
    ap.add_argument("--mu-min", type=int, default=3, help="smallest tasks per slot")
    ap.add_argument("--mu-max", type=int, default=5, help="largest tasks per slot")
    ap.add_argument("--util-mu", type=float, default=None,
                    help="tasks per slot assumed when scaling arrivals (default: mean of the mu range)")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", type=Path, help="batch task CSV")
    src.add_argument("--synthetic", action="store_true", help="generate a synthetic trace instead")
    ap.add_argument("--jobs", type=int, default=None, help="job limit (trace) or job count (synthetic, default 100)")
    ap.add_argument("--col-ts", type=int, default=DEFAULT_COLUMNS["ts"], help="timestamp column index")
    ap.add_argument("--col-job", type=int, default=DEFAULT_COLUMNS["job"], help="job id column index")
    ap.add_argument("--col-instances", type=int, default=DEFAULT_COLUMNS["instances"],
                    help="instance count column index")
    ap.add_argument("--skip-header", action="store_true", help="ignore the first CSV line")
    ap.add_argument("--out", type=Path, required=True, help="output directory for jobs.csv and summary.json")
    ap.add_argument("--workers", type=int, default=1, help="parallel simulation processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        algorithms=tuple(dict.fromkeys(args.algo)),
        server_count=args.servers,
        alphas=tuple(args.alpha or [0.0]),
        utils=tuple(args.util or [0.5]),
        p_range=(args.p_min, args.p_max),
        mu_range=(args.mu_min, args.mu_max),
        seeds=tuple(args.seed or [0]),
        trace=args.trace,
        synthetic=SyntheticConfig() if args.synthetic else None,
        job_limit=args.jobs,
        columns={"ts": args.col_ts, "job": args.col_job, "instances": args.col_instances},
        skip_header=args.skip_header,
        out_dir=args.out,
        workers=args.workers,
        util_mu=args.util_mu,
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.trace is not None and not cfg.trace.is_file():
            raise ConfigError(f"trace file {cfg.trace} not found")
    except ConfigError as e:
        print(f"dlsched: config error: {e}", file=sys.stderr)
        return 2
    try:
        summary = run_experiment(cfg)
    except TraceError as e:
        print(f"dlsched: trace error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # report any runtime failure with its cell and exit nonzero
        log.debug("run failed", exc_info=True)
        print(f"dlsched: error: {e}", file=sys.stderr)
        return 1
    print(f"{'algorithm':<10} {'alpha':>6} {'util':>6} {'jobs':>6} {'avg jct':>10} {'p50':>8} {'p90':>8} "
          f"{'p99':>8} {'overhead us':>12}")
    for c in summary.cells:
        print(f"{c.algorithm:<10} {c.alpha:>6g} {c.utilization:>6g} {c.jobs:>6d} {c.average_jct:>10.2f} "
              f"{c.p50:>8.1f} {c.p90:>8.1f} {c.p99:>8.1f} {c.mean_overhead_us:>12.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
