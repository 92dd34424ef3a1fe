"""Replica-deletion: replicate every task on all its servers, then prune.

Each iteration picks the most loaded server holding replicas and deletes
replicas of its most-replicated tasks until that server's estimated busy
time drops by one slot. Once every most-loaded server holds only sole
copies, the remaining duplicates are pruned from the busiest servers down.
"""
from __future__ import annotations

import random

from ..estimation import ceil_div
from ..ilp import counts_to_assignment
from ..model import Assignment, ClusterSnapshot, Job, Problem


class _ReplicaState:
    def __init__(self, problem: Problem):
        self.busy0 = dict(problem.busy)
        self.mu = dict(problem.mu)
        self.group_of: list[int] = []
        self.holders: list[set[int]] = []
        for g in problem.groups:
            for _ in range(g.task_count):
                self.group_of.append(g.group_index)
                self.holders.append(set(g.available_servers))
        servers = problem.job.servers
        self.load = {m: 0 for m in servers}
        # per server: replica count -> tasks with that count, plus each task's slot in its list
        self.buckets: dict[int, dict[int, list[int]]] = {m: {} for m in servers}
        self.where: dict[int, dict[int, int]] = {m: {} for m in servers}
        self.top = {m: 0 for m in servers}
        for t, hs in enumerate(self.holders):
            c = len(hs)
            for m in hs:
                self._add(m, t, c)
                self.load[m] += 1
                self.top[m] = max(self.top[m], c)

    def _add(self, m, t, c):
        lst = self.buckets[m].setdefault(c, [])
        self.where[m][t] = len(lst)
        lst.append(t)

    def _drop(self, m, t, c):
        lst = self.buckets[m][c]
        i = self.where[m].pop(t)
        last = lst.pop()
        if last != t:
            lst[i] = last
            self.where[m][last] = i

    def est(self, m) -> int:
        return self.busy0[m] + ceil_div(self.load[m], self.mu[m])

    def top_count(self, m) -> int:
        """Largest replica count among tasks on ``m`` (1 if all are sole copies)."""
        c = self.top[m]
        while c > 1 and not self.buckets[m].get(c):
            c -= 1
        self.top[m] = c
        return c

    def remove(self, m, t):
        c = len(self.holders[t])
        self.holders[t].discard(m)
        self._drop(m, t, c)
        self.load[m] -= 1
        for s in self.holders[t]:
            self._drop(s, t, c)
            self._add(s, t, c - 1)


def _trim(state: _ReplicaState, m: int, rng: random.Random) -> int:
    """Delete up to mu_m replicas from ``m``, stopping once its busy time drops a slot."""
    start = state.est(m)
    removed = 0
    for _ in range(state.mu[m]):
        c = state.top_count(m)
        if c <= 1:
            break
        t = rng.choice(state.buckets[m][c])
        state.remove(m, t)
        removed += 1
        if state.est(m) < start:
            break
    return removed


def replica_deletion(problem: Problem, seed: int = 0, stats: dict | None = None) -> Assignment:
    state = _ReplicaState(problem)
    rng = random.Random(seed)
    deletions = iterations = 0

    # deletion phase
    while True:
        holding = [m for m, n in state.load.items() if n]
        peak = max(state.est(m) for m in holding)
        targets = [m for m in holding if state.est(m) == peak and state.top_count(m) > 1]
        if not targets:
            break
        m = max(targets, key=lambda s: (state.top_count(s), state.busy0[s], -s))
        deletions += _trim(state, m, rng)
        iterations += 1

    # final phase: remaining duplicates, busiest server first
    while True:
        dup = [m for m, n in state.load.items() if n and state.top_count(m) > 1]
        if not dup:
            break
        m = max(dup, key=lambda s: (state.est(s), state.busy0[s], -s))
        deletions += _trim(state, m, rng)
        iterations += 1

    counts: dict[tuple[int, int], int] = {}
    for t, hs in enumerate(state.holders):
        (m,) = hs
        key = (state.group_of[t], m)
        counts[key] = counts.get(key, 0) + 1
    if stats is not None:
        stats["deletions"] = deletions
        stats["iterations"] = iterations
        stats["estimated_busy"] = {m: state.est(m) for m, n in state.load.items() if n}
    return counts_to_assignment(problem, counts)


def rd_assign(job: Job, snapshot: ClusterSnapshot, seed: int = 0) -> Assignment:
    return replica_deletion(Problem.of(job, snapshot), seed)
