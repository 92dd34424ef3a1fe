"""Water-filling: level one task group at a time onto its least busy servers."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

from ..estimation import min_slots
from ..model import Assignment, ClusterSnapshot, Job, Placement, Problem


@dataclass(frozen=True)
class ParticipationTrace:
    """Per processed group: its water level and the servers that were raised to it."""
    group_order: tuple[int, ...]
    levels: tuple[int, ...]
    participants: tuple[tuple[int, ...], ...]
    busy_after: tuple[dict[int, int], ...]


def water_fill(problem: Problem, order: Sequence[int] | None = None) -> tuple[Assignment, ParticipationTrace]:
    """Assign each group at the lowest level its servers can absorb it.

    ``order`` lists group indices to process; default is index order.
    """
    busy = dict(problem.busy)
    mu = problem.mu
    groups = problem.groups if order is None else [problem.job.group(k) for k in order]
    alloc = {}
    levels, parts, snaps = [], [], []
    touched = set()
    for g in groups:
        servers = g.available_servers
        level = min_slots(g.task_count, [(busy[m], mu[m]) for m in servers])
        raised = [m for m in servers if level > busy[m]]
        left = g.task_count
        places = []
        for m in raised:
            slots = level - busy[m]
            t = left if m == raised[-1] else min(left, slots * mu[m])
            if t > 0:
                places.append(Placement(m, slots, t))
            left -= t
            busy[m] = level
        alloc[g.group_index] = tuple(places)
        touched.update(raised)
        levels.append(level)
        parts.append(tuple(raised))
        snaps.append(dict(busy))
    phi = max(busy[m] for m in touched)
    trace = ParticipationTrace(tuple(g.group_index for g in groups), tuple(levels), tuple(parts), tuple(snaps))
    return Assignment(problem.job.id, alloc, phi), trace


def wf(problem: Problem) -> Assignment:
    return water_fill(problem)[0]


def wf_assign(job: Job, snapshot: ClusterSnapshot) -> tuple[Assignment, ParticipationTrace]:
    return water_fill(Problem.of(job, snapshot))
