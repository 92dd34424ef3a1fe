"""Workloads: trace ingestion, arrival scaling, skewed data placement and capacities."""
from __future__ import annotations

import csv
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .model import CapacityProfile, Job, TaskGroup

logger = logging.getLogger(__name__)

# batch_task.csv of the 2017 Alibaba trace: create time, end time, job id, task id, instances, ...
DEFAULT_COLUMNS = {"ts": 0, "job": 2, "instances": 4}


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRow:
    line: int
    create_timestamp: float
    job_key: str
    instance_count: int


@dataclass(frozen=True)
class TraceJob:
    """A job before data placement: arrival plus the task count of each group."""
    key: str
    arrival: float
    group_sizes: tuple[int, ...]

    @property
    def task_count(self) -> int:
        return sum(self.group_sizes)


def read_rows(path: str | Path, columns: dict[str, int] | None = None, skip_header: bool = False):
    """Parse a trace CSV into ``(rows, rejects)``; rejects are ``(line, reason)`` pairs."""
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    rows, rejects = [], []
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise TraceError(f"cannot read trace {path}: {e}") from e
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if skip_header and lineno == 1:
                continue
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                ts = float(rec[cols["ts"]])
                key = rec[cols["job"]].strip()
                raw = rec[cols["instances"]].strip()
            except IndexError:
                rejects.append((lineno, "missing column"))
                continue
            except ValueError:
                rejects.append((lineno, f"non-numeric timestamp {rec[cols['ts']]!r}"))
                continue
            try:
                n = int(float(raw))
            except ValueError:
                rejects.append((lineno, f"non-numeric instance count {raw!r}"))
                continue
            if n < 1:
                rejects.append((lineno, f"instance count {n} < 1"))
                continue
            if not key:
                rejects.append((lineno, "empty job id"))
                continue
            rows.append(TraceRow(lineno, ts, key, n))
    return rows, rejects


def parse_trace(path: str | Path, columns: dict[str, int] | None = None, job_limit: int | None = None,
                skip_header: bool = False) -> list[TraceJob]:
    """Group trace rows into jobs, one task group per row, in first-appearance order.

    A job arrives at its earliest row timestamp. Bad rows are logged and skipped.
    """
    rows, rejects = read_rows(path, columns, skip_header)
    for line, why in rejects:
        logger.warning("%s:%d: row rejected (%s)", path, line, why)
    jobs: dict[str, list[TraceRow]] = {}
    for r in rows:
        if r.job_key not in jobs:
            if job_limit is not None and len(jobs) >= job_limit:
                continue
            jobs[r.job_key] = []
        jobs[r.job_key].append(r)
    return [TraceJob(k, min(r.create_timestamp for r in rs), tuple(r.instance_count for r in rs))
            for k, rs in jobs.items()]


def total_work(group_sizes: Sequence[Sequence[int]], mean_mu: float) -> int:
    return sum(math.ceil(sum(g) / mean_mu) for g in group_sizes)


def scale_to_utilization(jobs: Sequence[TraceJob], target_util: float, server_count: int,
                         mean_mu: float) -> list[TraceJob]:
    """Rescale inter-arrival gaps so offered work over the arrival horizon hits ``target_util``.

    Arrivals are shifted to start at slot 0 and rounded down to whole slots.
    """
    if len(jobs) < 2:
        raise TraceError("need at least two jobs to scale arrivals")
    if not 0 < target_util <= 1:
        raise TraceError(f"target utilization {target_util} outside (0, 1]")
    first = min(j.arrival for j in jobs)
    span = max(j.arrival for j in jobs) - first
    if span <= 0:
        raise TraceError("all jobs arrive at the same time; horizon is zero")
    horizon = total_work([j.group_sizes for j in jobs], mean_mu) / (server_count * target_util)
    factor = horizon / span
    if not math.isfinite(factor):
        raise TraceError(f"arrival span {span!r} too small to scale to a {horizon:.1f}-slot horizon")
    return [replace(j, arrival=math.floor((j.arrival - first) * factor)) for j in jobs]


@dataclass(frozen=True)
class PlacementConfig:
    server_count: int
    alpha: float = 0.0
    p_min: int = 8
    p_max: int = 12
    seed: int = 0
    fresh_permutation: bool = False

    def __post_init__(self):
        if not 1 <= self.p_min <= self.p_max <= self.server_count:
            raise ValueError(f"need 1 <= p_min <= p_max <= M, got {self.p_min}, {self.p_max}, {self.server_count}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass(frozen=True)
class CapacityConfig:
    mu_min: int = 3
    mu_max: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.mu_min <= self.mu_max:
            raise ValueError(f"need 1 <= mu_min <= mu_max, got {self.mu_min}, {self.mu_max}")

    @property
    def mean(self) -> float:
        return (self.mu_min + self.mu_max) / 2


def zipf_weights(n: int, alpha: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** alpha
    return w / w.sum()


def sample_ranks(n: int, alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """1-based ranks drawn with probability proportional to ``1 / rank**alpha``."""
    return rng.choice(np.arange(1, n + 1), size=size, p=zipf_weights(n, alpha))


def consecutive_servers(anchor: int, p: int, server_count: int) -> tuple[int, ...]:
    """``anchor, anchor+1, ..., anchor+p-1`` wrapping past ``server_count`` back to 1."""
    return tuple(sorted((anchor - 1 + i) % server_count + 1 for i in range(p)))


def gen_placement(groups_per_job: Sequence[int], cfg: PlacementConfig) -> list[list[tuple[int, ...]]]:
    """Available-server sets for every group of every job.

    Each group's anchor is the server at a Zipf-distributed rank of a random
    permutation, and its servers are the ``p`` consecutive ones from there.
    The permutation is drawn once per call so that skew concentrates data on
    the same servers; ``fresh_permutation`` redraws it for every group.
    """
    M = cfg.server_count
    rng = np.random.default_rng(cfg.seed)
    total = int(sum(groups_per_job))
    ranks = sample_ranks(M, cfg.alpha, total, rng)
    sizes = rng.integers(cfg.p_min, cfg.p_max + 1, size=total)
    perm = rng.permutation(M) + 1
    out, i = [], 0
    for n in groups_per_job:
        sets = []
        for _ in range(n):
            if cfg.fresh_permutation:
                perm = rng.permutation(M) + 1
            sets.append(consecutive_servers(int(perm[ranks[i] - 1]), int(sizes[i]), M))
            i += 1
        out.append(sets)
    return out


def gen_capacity(server_count: int, job_ids: Sequence[int], cfg: CapacityConfig) -> CapacityProfile:
    rng = np.random.default_rng(cfg.seed)
    draws = rng.integers(cfg.mu_min, cfg.mu_max + 1, size=(len(job_ids), server_count))
    return CapacityProfile({(m, c): int(draws[i, m - 1]) for i, c in enumerate(job_ids)
                            for m in range(1, server_count + 1)})


@dataclass(frozen=True)
class SyntheticConfig:
    """Random jobs shaped like the batch trace segment: about 5.5 groups and 450 tasks per job.

    Group sizes are log-normal, so most groups are small and a few are huge.
    """
    jobs: int = 100
    groups_min: int = 1
    groups_max: int = 10
    tasks_median: float = 12.0
    tasks_sigma: float = 2.0
    tasks_max: int = 5000
    seed: int = 0


def synthetic_trace(cfg: SyntheticConfig) -> list[TraceJob]:
    rng = np.random.default_rng(cfg.seed)
    gaps = rng.exponential(1.0, size=cfg.jobs)
    arrivals = np.cumsum(gaps) - gaps[0]
    out = []
    for c in range(cfg.jobs):
        k = int(rng.integers(cfg.groups_min, cfg.groups_max + 1))
        sizes = np.ceil(rng.lognormal(math.log(cfg.tasks_median), cfg.tasks_sigma, size=k))
        sizes = np.clip(sizes, 1, cfg.tasks_max).astype(int)
        out.append(TraceJob(f"syn-{c}", float(arrivals[c]), tuple(int(s) for s in sizes)))
    return out


def build_jobs(trace: Sequence[TraceJob], placement: PlacementConfig) -> list[Job]:
    """Attach server sets to trace jobs and return ``Job`` objects sorted by arrival.

    Groups of one job that land on the same server set are merged, since a
    job's groups must have distinct sets.
    """
    sets = gen_placement([len(t.group_sizes) for t in trace], placement)
    order = sorted(range(len(trace)), key=lambda i: (trace[i].arrival, i))
    jobs = []
    for c, i in enumerate(order):
        t = trace[i]
        merged: dict[tuple[int, ...], int] = {}
        for n, s in zip(t.group_sizes, sets[i]):
            merged[s] = merged.get(s, 0) + n
        groups = tuple(TaskGroup(c, k, n, s) for k, (s, n) in enumerate(merged.items(), start=1))
        jobs.append(Job(c, int(t.arrival), groups, t.key))
    return jobs


def make_workload(trace: Sequence[TraceJob], *, server_count: int, alpha: float, util: float,
                  p_range: tuple[int, int] = (8, 12), mu_range: tuple[int, int] = (3, 5),
                  seed: int = 0, fresh_permutation: bool = False,
                  util_mu: float | None = None) -> tuple[list[Job], CapacityProfile]:
    """Scale, place and profile a trace: everything one simulation run needs.

    Arrivals are scaled against ``util_mu`` (default: the mean of ``mu_range``);
    pin it to compare capacity ranges under identical arrival times. A single
    job has no inter-arrival gaps to scale and simply arrives at slot 0.
    """
    cap_cfg = CapacityConfig(*mu_range, seed=seed + 1)
    if len(trace) == 1:
        scaled = [replace(trace[0], arrival=0)]
    else:
        scaled = scale_to_utilization(trace, util, server_count, util_mu or cap_cfg.mean)
    place = PlacementConfig(server_count, alpha, *p_range, seed=seed, fresh_permutation=fresh_permutation)
    jobs = build_jobs(scaled, place)
    return jobs, gen_capacity(server_count, [j.id for j in jobs], cap_cfg)
