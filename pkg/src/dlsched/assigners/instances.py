"""Worst-case instance family for water-filling.

Group ``k`` (1-based) of a ``K``-group job may run on servers
``1..sum(theta**i for i in 1..K-k+1)`` and has ``theta`` tasks per server, so
each group's servers contain the next group's. With ``mu = 1`` and idle
servers water-filling stacks the groups to ``K * theta`` while the optimum
stays near ``theta``: ``theta + 1`` for two groups, ``theta + 2`` for three.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..model import Problem


@dataclass(frozen=True)
class TheoremInstance:
    theta: int
    k_count: int

    def __post_init__(self):
        if self.theta < 2 or self.k_count < 1:
            raise ValueError("theta must be >= 2 and k_count >= 1")

    @property
    def server_counts(self) -> tuple[int, ...]:
        K, th = self.k_count, self.theta
        return tuple(sum(th ** i for i in range(1, K - k + 2)) for k in range(1, K + 1))

    @property
    def task_counts(self) -> tuple[int, ...]:
        return tuple(self.theta * s for s in self.server_counts)

    def problem(self, job_id: int = 0) -> Problem:
        groups = [(t, range(1, s + 1)) for t, s in zip(self.task_counts, self.server_counts)]
        return Problem.build(groups, mu=1, job_id=job_id)

    @property
    def wf_makespan(self) -> int:
        return self.k_count * self.theta

    @property
    def opt_makespan(self) -> int:
        """Optimum from Hall's condition on the nested server prefixes (unit rate, idle servers)."""
        sizes, tasks = self.server_counts, self.task_counts
        return max(-(-sum(tasks[j:]) // sizes[j]) for j in range(self.k_count))
