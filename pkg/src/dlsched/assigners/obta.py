"""Exact task assignment by scanning linear subranges of the completion level."""
from __future__ import annotations

from ..estimation import BoundsRange, breakpoints_within, phi_bounds, slot_upper_bound, subranges, upper_bound
from ..ilp import DEFAULT_NODE_LIMIT, LinearSubproblem, level_witness, slots_to_assignment, solve_subrange
from ..model import Assignment, ClusterSnapshot, Job, Problem


def _scan(problem: Problem, bounds: BoundsRange, node_limit: int | None = DEFAULT_NODE_LIMIT,
          level: bool = True) -> Assignment:
    for lo, hi in subranges(bounds):
        found = solve_subrange(LinearSubproblem.for_range(problem, lo, hi), node_limit)
        if found is not None:
            phi, witness = found
            if level:
                witness = level_witness(problem, witness)
            return slots_to_assignment(problem, phi, witness)
    # rounding each group separately can push the optimum past the pooled upper bound
    top = slot_upper_bound(problem)
    if top > bounds.phi_hi:
        lo = bounds.phi_hi + 1
        return _scan(problem, BoundsRange(lo, top, breakpoints_within(problem.busy, problem.job.servers, lo, top)),
                     node_limit, level)
    raise AssertionError(f"no feasible level up to {top} for job {problem.job.id}")


def obta(problem: Problem) -> Assignment:
    """Optimal assignment, searching only between the lower and upper bounds."""
    return _scan(problem, phi_bounds(problem))


def nlip(problem: Problem) -> Assignment:
    """Same optimum as :func:`obta` but without the lower bound: the scan starts at slot 1."""
    hi = upper_bound(problem)
    bounds = BoundsRange(1, hi, breakpoints_within(problem.busy, problem.job.servers, 1, hi))
    return _scan(problem, bounds)


def obta_assign(job: Job, snapshot: ClusterSnapshot) -> Assignment:
    return obta(Problem.of(job, snapshot))


def nlip_assign(job: Job, snapshot: ClusterSnapshot) -> Assignment:
    return nlip(Problem.of(job, snapshot))
