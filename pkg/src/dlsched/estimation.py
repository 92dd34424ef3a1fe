"""Busy-time estimation and the search interval for a job's completion time."""
from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .model import CapacityProfile, Problem, QueueEntry


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def busy_time(queue: Iterable[QueueEntry], capacity: CapacityProfile, server: int) -> int:
    """Slots needed to drain ``queue`` on ``server``.

    Tasks of one job are pooled before rounding up, so two entries of the same
    job never cost an extra partial slot.
    """
    per_job: dict[int, int] = {}
    for e in queue:
        if e.remaining_tasks:
            per_job[e.job_id] = per_job.get(e.job_id, 0) + e.remaining_tasks
    return sum(ceil_div(n, capacity.get(server, h)) for h, n in per_job.items())


def fill_capacity(x: int, servers: Sequence[tuple[int, int]]) -> int:
    """Tasks that fit below level ``x`` on ``(busy, mu)`` servers."""
    return sum((x - b) * u for b, u in servers if x > b)


def min_slots(demand: int, servers: Sequence[tuple[int, int]]) -> int:
    """Smallest level ``x`` such that ``fill_capacity(x, servers) >= demand``."""
    if not servers:
        raise ValueError("min_slots needs at least one server")
    lo = 0
    hi = max(b for b, _ in servers) + ceil_div(demand, sum(u for _, u in servers))
    while lo < hi:
        mid = (lo + hi) // 2
        if fill_capacity(mid, servers) >= demand:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class BoundsRange:
    phi_lo: int
    phi_hi: int
    breakpoints: tuple[int, ...] = ()

    def __post_init__(self):
        if self.phi_lo > self.phi_hi:
            raise ValueError(f"empty bounds [{self.phi_lo}, {self.phi_hi}]")


def group_lower_bounds(problem: Problem) -> list[int]:
    """Per group, the level it would need if it were the job's only group."""
    return [min_slots(g.task_count, [(problem.busy[m], problem.mu[m]) for m in g.available_servers])
            for g in problem.groups]


def lower_bound(problem: Problem) -> int:
    return max(group_lower_bounds(problem))


def upper_bound(problem: Problem) -> int:
    """Worst case where each server alone takes every task it could serve."""
    load: dict[int, int] = {}
    for g in problem.groups:
        for m in g.available_servers:
            load[m] = load.get(m, 0) + g.task_count
    return max(ceil_div(n, problem.mu[m]) + problem.busy[m] for m, n in load.items())


def slot_upper_bound(problem: Problem) -> int:
    """Like :func:`upper_bound` but rounding each group up on its own.

    Always feasible when every group's share of a server costs whole slots;
    the pooled bound can fall one or more slots short of that.
    """
    need: dict[int, int] = {}
    for g in problem.groups:
        for m in g.available_servers:
            need[m] = need.get(m, 0) + ceil_div(g.task_count, problem.mu[m])
    return max(n + problem.busy[m] for m, n in need.items())


def breakpoints_within(busy: Mapping[int, int], servers: Iterable[int], lo: int, hi: int) -> tuple[int, ...]:
    return tuple(sorted({busy[m] for m in servers if lo <= busy[m] <= hi}))


def phi_bounds(problem: Problem) -> BoundsRange:
    lo, hi = lower_bound(problem), upper_bound(problem)
    return BoundsRange(lo, hi, breakpoints_within(problem.busy, problem.job.servers, lo, hi))


def subranges(bounds: BoundsRange) -> list[tuple[int, int]]:
    """Split ``[phi_lo, phi_hi]`` into half-open ``(lo, hi)`` pieces at the breakpoints.

    Inside one piece every server's spare capacity ``max(phi - b, 0)`` is
    linear in ``phi``.
    """
    cuts = [bounds.phi_lo]
    cuts += [b for b in bounds.breakpoints if bounds.phi_lo < b <= bounds.phi_hi]
    cuts.append(bounds.phi_hi + 1)
    return [(a, b) for a, b in zip(cuts, cuts[1:]) if a < b]
