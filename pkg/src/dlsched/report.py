"""Experiment grid runner and JCT / overhead summaries."""
from __future__ import annotations

import csv
import json
import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .simulator import ALGORITHMS, JctRecord, SimConfig, run
from .workload import (CapacityConfig, PlacementConfig, SyntheticConfig, TraceJob, make_workload, parse_trace,
                       synthetic_trace)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("job_id", "algorithm", "alpha", "utilization", "seed", "arrival_slot", "completion_slot",
               "jct_slots", "decision_overhead_us")


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple[str, ...]
    server_count: int = 100
    alphas: tuple[float, ...] = (0.0,)
    utils: tuple[float, ...] = (0.5,)
    p_range: tuple[int, int] = (8, 12)
    mu_range: tuple[int, int] = (3, 5)
    seeds: tuple[int, ...] = (0,)
    trace: Path | None = None
    synthetic: SyntheticConfig | None = None
    job_limit: int | None = None
    columns: dict[str, int] | None = None
    skip_header: bool = False
    out_dir: Path | None = None
    workers: int = 1
    util_mu: float | None = None

    def __post_init__(self):
        if not self.algorithms:
            raise ConfigError("need at least one algorithm")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigError(f"unknown algorithm(s) {bad}; choose from {list(ALGORITHMS)}")
        if (self.trace is None) == (self.synthetic is None):
            raise ConfigError("give exactly one of a trace file or a synthetic workload")
        if self.server_count < 1:
            raise ConfigError("server count must be positive")
        if not (self.alphas and self.utils and self.seeds):
            raise ConfigError("alpha, utilization and seed lists must be non-empty")
        for u in self.utils:
            if not 0 < u <= 1:
                raise ConfigError(f"utilization {u} outside (0, 1]")
        if self.job_limit is not None and self.job_limit < 1:
            raise ConfigError("job limit must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.util_mu is not None and self.util_mu <= 0:
            raise ConfigError("utilization reference mu must be positive")
        try:
            for a in self.alphas:
                PlacementConfig(self.server_count, a, *self.p_range)
            CapacityConfig(*self.mu_range)
        except ValueError as e:
            raise ConfigError(str(e)) from e


def cdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF as ``(value, fraction <= value)`` at each distinct value."""
    if len(values) == 0:
        raise ValueError("cdf of an empty sample")
    xs, counts = np.unique(np.asarray(values), return_counts=True)
    cum = np.cumsum(counts)
    n = int(cum[-1])
    out = [(x.item(), int(c) / n) for x, c in zip(xs, cum)]
    out[-1] = (out[-1][0], 1.0)
    return out


@dataclass
class CellSummary:
    algorithm: str
    alpha: float
    utilization: float
    jobs: int
    seeds: list[int]
    average_jct: float
    p50: float
    p90: float
    p99: float
    mean_overhead_us: float
    total_overhead_us: float
    cdf: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class Summary:
    cells: list[CellSummary]

    def cell(self, algorithm: str, alpha: float, utilization: float) -> CellSummary:
        for c in self.cells:
            if (c.algorithm, c.alpha, c.utilization) == (algorithm, alpha, utilization):
                return c
        raise KeyError((algorithm, alpha, utilization))

    def to_json(self) -> dict:
        return {"cells": [asdict(c) for c in self.cells]}


def summarize(algorithm: str, alpha: float, util: float, seeds: Sequence[int],
              records: Sequence[JctRecord]) -> CellSummary:
    jcts = [r.jct for r in records]
    over = [r.decision_overhead_us for r in records]
    p50, p90, p99 = (float(v) for v in np.percentile(jcts, [50, 90, 99]))
    return CellSummary(algorithm, alpha, util, len(records), list(seeds), sum(jcts) / len(jcts), p50, p90, p99,
                       sum(over) / len(over), sum(over), cdf(jcts))


def load_trace(cfg: ExperimentConfig) -> list[TraceJob]:
    if cfg.trace is not None:
        trace = parse_trace(cfg.trace, cfg.columns, cfg.job_limit, cfg.skip_header)
    else:
        syn = cfg.synthetic
        if cfg.job_limit is not None:
            syn = SyntheticConfig(**{**asdict(syn), "jobs": cfg.job_limit})
        trace = synthetic_trace(syn)
    if not trace:
        raise ExperimentError("workload has no jobs")
    return trace


def _run_cell(args) -> list[JctRecord]:
    trace, cfg, algorithm, alpha, util, seed = args
    try:
        jobs, capacity = make_workload(trace, server_count=cfg.server_count, alpha=alpha, util=util,
                                       p_range=cfg.p_range, mu_range=cfg.mu_range, seed=seed,
                                       util_mu=cfg.util_mu)
        return run(SimConfig(cfg.server_count, seed), jobs, capacity, algorithm)
    except Exception as e:
        raise ExperimentError(f"cell algorithm={algorithm} alpha={alpha} util={util} seed={seed}: {e}") from e


def run_experiment(cfg: ExperimentConfig) -> Summary:
    """Simulate every (algorithm, alpha, util, seed) cell; write ``jobs.csv`` and ``summary.json``.

    Seeds are pooled inside a cell: its summary covers the jobs of all its seeds.
    """
    trace = load_trace(cfg)
    cells = list(product(cfg.algorithms, cfg.alphas, cfg.utils, cfg.seeds))
    tasks = [(trace, cfg, *c) for c in cells]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]

    rows = []
    pooled: dict[tuple[str, float, float], list[JctRecord]] = {}
    for (algorithm, alpha, util, seed), recs in zip(cells, results):
        logger.info("%s alpha=%g util=%g seed=%d: avg jct %.2f", algorithm, alpha, util, seed,
                    sum(r.jct for r in recs) / len(recs))
        pooled.setdefault((algorithm, alpha, util), []).extend(recs)
        rows += [(r.job_id, algorithm, alpha, util, seed, r.arrival, r.completion, r.jct, r.decision_overhead_us)
                 for r in recs]
    summary = Summary([summarize(a, al, u, cfg.seeds, recs) for (a, al, u), recs in pooled.items()])

    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "jobs.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            w.writerows(rows)
        with open(out / "summary.json", "w") as fh:
            json.dump(summary.to_json(), fh, indent=2)
    return summary


def read_jobs_csv(path: str | Path) -> list[dict]:
    """Rows of a ``jobs.csv`` with numeric fields converted back."""
    conv = {"job_id": int, "alpha": float, "utilization": float, "seed": int, "arrival_slot": int,
            "completion_slot": int, "jct_slots": int, "decision_overhead_us": float}
    with open(path, newline="") as fh:
        return [{k: conv.get(k, str)(v) for k, v in row.items()} for row in csv.DictReader(fh)]
