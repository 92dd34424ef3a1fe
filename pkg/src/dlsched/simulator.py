"""Slot-granular simulation of job arrivals, assignment decisions and FIFO draining.

A server spends each whole slot on the job at the head of its queue and
processes up to ``mu`` of that job's tasks, so a slot is never shared by two
jobs. Arrivals happen on slot boundaries; jobs arriving in the same slot are
decided one by one in input order.
"""
from __future__ import annotations

import gc
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .assigners import ASSIGNERS
from .estimation import ceil_div
from .model import Assignment, CapacityProfile, ClusterSnapshot, InvalidJob, Job, Problem, QueueEntry
from .reorder import ocwf_reorder, remaining_tasks

logger = logging.getLogger(__name__)

FIFO_ALGORITHMS = ("nlip", "obta", "wf", "rd")
REORDER_ALGORITHMS = ("ocwf", "ocwf-acc")
ALGORITHMS = FIFO_ALGORITHMS + REORDER_ALGORITHMS


@dataclass(frozen=True)
class SimConfig:
    server_count: int
    seed: int = 0


@dataclass
class JctRecord:
    job_id: int
    arrival: int
    completion: int
    jct: int
    decision_overhead_us: float
    estimate: int | None = None


@dataclass
class SimState:
    clock: int
    queues: dict[int, list[QueueEntry]]
    capacity: CapacityProfile
    jobs: dict[int, Job] = field(default_factory=dict)
    processed: dict[int, dict[int, int]] = field(default_factory=dict)
    left: dict[int, int] = field(default_factory=dict)
    last_finish: dict[int, int] = field(default_factory=dict)
    completion: dict[int, int] = field(default_factory=dict)

    @property
    def server_count(self) -> int:
        return len(self.queues)

    def snapshot(self) -> ClusterSnapshot:
        return ClusterSnapshot(self.server_count, self.queues, self.capacity)

    def admit(self, job: Job) -> None:
        self.jobs[job.id] = job
        self.processed[job.id] = {g.group_index: 0 for g in job.groups}
        self.left[job.id] = job.task_count

    def enqueue(self, assignment: Assignment) -> None:
        for k, places in assignment.allocations.items():
            for p in places:
                if p.tasks:
                    self.queues[p.server].append(QueueEntry(assignment.job_id, k, p.tasks))

    def _process(self, entry: QueueEntry, n: int, finish: int) -> None:
        entry.remaining_tasks -= n
        j = entry.job_id
        self.processed[j][entry.group_index] += n
        self.left[j] -= n
        if finish > self.last_finish.get(j, -1):
            self.last_finish[j] = finish
        if self.left[j] == 0:
            self.completion[j] = self.last_finish[j]


def _drain_server(state: SimState, m: int, start: int, until: int | None) -> None:
    """Run server ``m`` from slot ``start`` until slot ``until`` (None: empty the queue)."""
    q = state.queues[m]
    t = start
    while q and (until is None or t < until):
        h = q[0].job_id
        u = state.capacity.get(m, h)
        entries = [e for e in q if e.job_id == h]
        total = sum(e.remaining_tasks for e in entries)
        need = ceil_div(total, u)
        slots = need if until is None else min(need, until - t)
        budget = min(total, slots * u)
        t_end = t + slots
        for e in entries:
            if budget <= 0:
                break
            n = min(budget, e.remaining_tasks)
            budget -= n
            state._process(e, n, t_end)
        q[:] = [e for e in q if e.remaining_tasks > 0]
        t = t_end


def advance_to(state: SimState, until: int | None) -> None:
    """Advance every server to slot ``until``, or drain completely when None."""
    for m in state.queues:
        _drain_server(state, m, state.clock, until)
    if until is not None:
        state.clock = max(state.clock, until)
    else:
        state.clock = max([state.clock, *state.completion.values()])


def advance_slot(state: SimState) -> SimState:
    advance_to(state, state.clock + 1)
    return state


def measure_overhead(thunk: Callable[[], object]) -> tuple[object, float]:
    """Call ``thunk`` and return its result with the wall time in microseconds.

    Garbage collection is paused while timing, as ``timeit`` does.
    """
    was_on = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter_ns()
        out = thunk()
        elapsed = (time.perf_counter_ns() - t0) / 1000.0
    finally:
        if was_on:
            gc.enable()
    return out, elapsed


def _check_job(job: Job, server_count: int) -> None:
    for g in job.groups:
        bad = [m for m in g.available_servers if not 1 <= m <= server_count]
        if bad:
            raise InvalidJob(f"job {job.id} group {g.group_index}: unknown servers {bad}")


def run(config: SimConfig, jobs: Sequence[Job], capacity: CapacityProfile, algorithm: str,
        estimates: dict[int, int] | None = None) -> list[JctRecord]:
    """Simulate ``jobs`` (sorted by arrival) under ``algorithm`` and return one record per job."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    ids = [j.id for j in jobs]
    if len(set(ids)) != len(ids):
        raise InvalidJob("duplicate job ids")
    for a, b in zip(jobs, jobs[1:]):
        if b.arrival < a.arrival:
            raise InvalidJob(f"jobs not sorted by arrival: job {b.id} at {b.arrival} after job {a.id} at {a.arrival}")
    for j in jobs:
        _check_job(j, config.server_count)

    state = SimState(0, {m: [] for m in range(1, config.server_count + 1)}, capacity)
    overhead: dict[int, float] = {}
    phi: dict[int, int] = {}
    assign = ASSIGNERS.get(algorithm)

    for job in jobs:
        advance_to(state, job.arrival)
        state.admit(job)
        if algorithm in FIFO_ALGORITHMS:
            problem = Problem.of(job, state.snapshot())
            if algorithm == "rd":
                thunk = lambda: assign(problem, seed=config.seed * 1_000_003 + job.id)  # noqa: E731
            else:
                thunk = lambda: assign(problem)  # noqa: E731
            a, us = measure_overhead(thunk)
            state.enqueue(a)
            phi[job.id] = a.phi
        else:
            outstanding = [o for o in (remaining_tasks(j, state.processed[j.id]) for j in state.jobs.values()
                                       if j.id not in state.completion) if o is not None]
            res, us = measure_overhead(
                lambda: ocwf_reorder(outstanding, capacity, accelerate=(algorithm == "ocwf-acc")))
            for q in state.queues.values():
                q.clear()
            for jid in res.order:
                state.enqueue(res.assignments[jid])
            phi[job.id] = res.phis[job.id]
        overhead[job.id] = us
        logger.debug("slot %d: job %d decided in %.1f us", job.arrival, job.id, us)
    advance_to(state, None)

    if estimates is not None:
        estimates.update(phi)
    records = []
    for j in jobs:
        done = state.completion[j.id]
        records.append(JctRecord(j.id, j.arrival, done, done - j.arrival, overhead[j.id], phi[j.id]))
    return records
