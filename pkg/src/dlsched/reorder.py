"""Order-conscious water-filling: rebuild the execution order of outstanding jobs.

On every arrival the outstanding jobs are placed one position at a time onto
initially idle servers. Each position goes to the job that water-filling says
would finish soonest given the jobs already placed. With ``accelerate`` the
candidates are visited in order of their lower bound and the scan stops as
soon as a lower bound cannot beat the best job found so far.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from .assigners.wf import wf
from .estimation import ceil_div, lower_bound
from .model import Assignment, CapacityProfile, Job, Problem, TaskGroup


@dataclass(frozen=True)
class OutstandingJob:
    job: Job
    remaining: Mapping[int, int]  # group_index -> unprocessed tasks

    @property
    def id(self) -> int:
        return self.job.id

    @property
    def arrival(self) -> int:
        return self.job.arrival

    @property
    def task_count(self) -> int:
        return sum(self.remaining.values())

    def as_job(self) -> Job:
        """The job restricted to its unprocessed tasks (fully processed groups dropped)."""
        groups = tuple(TaskGroup(self.job.id, g.group_index, self.remaining[g.group_index], g.available_servers)
                       for g in self.job.groups if self.remaining.get(g.group_index, 0) > 0)
        return Job(self.job.id, self.job.arrival, groups, self.job.name)


def remaining_tasks(job: Job, processed: Mapping[int, int]) -> OutstandingJob | None:
    """Unprocessed tasks of ``job`` given per-group processed counts; None once finished.

    Tasks still waiting in a queue count as unprocessed and get reassigned.
    """
    rem = {}
    for g in job.groups:
        done = processed.get(g.group_index, 0)
        if not 0 <= done <= g.task_count:
            raise ValueError(f"group {g.group_index} of job {job.id}: {done} processed of {g.task_count}")
        rem[g.group_index] = g.task_count - done
    if not any(rem.values()):
        return None
    return OutstandingJob(job, rem)


@dataclass
class ReorderResult:
    order: list[int]
    assignments: dict[int, Assignment]
    phis: dict[int, int]
    wf_calls: int = 0
    calls_per_position: list[int] = field(default_factory=list)
    busy: dict[int, int] = field(default_factory=dict)


def ocwf_reorder(outstanding: Sequence[OutstandingJob], capacity: CapacityProfile, accelerate: bool = True,
                 assigner: Callable[[Problem], Assignment] = wf,
                 initial_busy: Mapping[int, int] | None = None) -> ReorderResult:
    """Greedy shortest-estimated-completion-first order of ``outstanding``.

    Ties on the estimate go to the earlier arrival, then the lower job id, so
    the accelerated and plain scans pick the same job at every position.
    """
    if not outstanding:
        raise ValueError("nothing to reorder")
    jobs = {o.id: o.as_job() for o in outstanding}
    if len(jobs) != len(outstanding):
        raise ValueError("duplicate job in outstanding set")
    mus = {j.id: capacity.for_job(j.id, j.servers) for j in jobs.values()}
    busy: dict[int, int] = dict(initial_busy or {})
    left = list(jobs.values())
    result = ReorderResult([], {}, {})

    def problem(j: Job) -> Problem:
        return Problem(j, {m: busy.get(m, 0) for m in j.servers}, mus[j.id])

    while left:
        if accelerate:
            keyed = sorted(((lower_bound(problem(j)), j.arrival, j.id), j) for j in left)
        else:
            keyed = [((0, j.arrival, j.id), j) for j in sorted(left, key=lambda j: (j.arrival, j.id))]
        best = best_key = None
        calls = 0
        for key, j in keyed:
            if accelerate and best is not None and key > best_key:
                break  # early exit: every later candidate's bound is at least as bad
            a = assigner(problem(j))
            calls += 1
            cand = (a.phi, j.arrival, j.id)
            if best is None or cand < best_key:
                best, best_key = a, cand
        chosen = jobs[best.job_id]
        result.order.append(chosen.id)
        result.assignments[chosen.id] = best
        result.phis[chosen.id] = best.phi
        result.calls_per_position.append(calls)
        result.wf_calls += calls
        for m, n in best.tasks_by_server().items():
            busy[m] = busy.get(m, 0) + ceil_div(n, mus[chosen.id][m])
        left = [j for j in left if j.id != chosen.id]
    result.busy = busy
    return result


def outstanding_from(jobs: Iterable[Job], processed: Mapping[int, Mapping[int, int]]) -> list[OutstandingJob]:
    out = []
    for j in jobs:
        o = remaining_tasks(j, processed.get(j.id, {}))
        if o is not None:
            out.append(o)
    return out
