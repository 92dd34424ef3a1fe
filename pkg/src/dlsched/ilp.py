"""Exact solver for the slot-allocation program restricted to one linear subrange.

For a fixed completion level ``phi`` the question is whether integer slots
``n[k][m]`` exist with ``sum_k n[k][m] <= phi - b_m`` on every active server and
``sum_m n[k][m] * mu_m >= T_k`` for every group. That is decided by
depth-first branch-and-bound with a fractional transport relaxation for
pruning. The relaxation alone is not exact because a slot serves one group
only and ``mu`` differs between servers. A search that runs past its node
budget is handed to HiGHS as a small integer program instead.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .estimation import ceil_div, min_slots
from .model import Assignment, Placement, Problem

Witness = tuple[dict[int, int], ...]


def transport(demands: Sequence[int], eligible: Sequence[Sequence[int]],
              caps: Mapping[int, int]) -> list[dict[int, int]] | None:
    """Integral bipartite flow meeting every demand within server ``caps``, or None.

    Greedy fill first, then shortest augmenting paths over groups and servers.
    """
    residual = dict(caps)
    flows: list[dict[int, int]] = [{} for _ in demands]
    users: dict[int, set[int]] = {}
    need = list(demands)
    for k, servers in enumerate(eligible):
        for m in servers:
            if need[k] <= 0:
                break
            a = min(need[k], residual.get(m, 0))
            if a > 0:
                flows[k][m] = flows[k].get(m, 0) + a
                residual[m] -= a
                need[k] -= a
                users.setdefault(m, set()).add(k)
    for k in range(len(demands)):
        while need[k] > 0:
            # BFS over alternating paths: group -> server, server -> group using it
            parent_server: dict[int, int] = {}   # server -> group that reached it
            parent_group: dict[int, int] = {k: -1}  # group -> server it was reached from
            queue = deque([k])
            end = None
            while queue and end is None:
                g = queue.popleft()
                for m in eligible[g]:
                    if m in parent_server:
                        continue
                    parent_server[m] = g
                    if residual.get(m, 0) > 0:
                        end = m
                        break
                    for g2 in users.get(m, ()):
                        if g2 not in parent_group:
                            parent_group[g2] = m
                            queue.append(g2)
            if end is None:
                return None
            # bottleneck
            amount = min(need[k], residual[end])
            m = end
            g = parent_server[m]
            while g != k:
                back = parent_group[g]
                amount = min(amount, flows[g][back])
                m = back
                g = parent_server[m]
            # apply
            residual[end] -= amount
            m = end
            g = parent_server[m]
            while True:
                flows[g][m] = flows[g].get(m, 0) + amount
                users.setdefault(m, set()).add(g)
                if g == k:
                    break
                back = parent_group[g]
                flows[g][back] -= amount
                if flows[g][back] == 0:
                    del flows[g][back]
                    users[back].discard(g)
                m = back
                g = parent_server[m]
            need[k] -= amount
    return flows


class _Exhausted(Exception):
    pass


DEFAULT_NODE_LIMIT = 1000
REPAIR_NODE_LIMIT = 200


def find_slots(demands: Sequence[int], eligible: Sequence[Sequence[int]], caps: Mapping[int, int],
               mu: Mapping[int, int], node_limit: int | None = DEFAULT_NODE_LIMIT) -> Witness | None:
    """Integer slots covering every demand within ``caps``, or None if none exist.

    ``node_limit`` bounds the branch-and-bound; past it the integer program
    goes to HiGHS. ``None`` means search without a budget.
    """
    elig = [tuple(m for m in servers if caps.get(m, 0) > 0) for servers in eligible]
    for d, e in zip(demands, elig):
        if d > 0 and not e:
            return None
    task_caps = {m: caps[m] * mu[m] for e in elig for m in e}
    flow = transport(demands, elig, task_caps)
    if flow is None:
        return None

    rates = {mu[m] for e in elig for m in e}
    if len(rates) <= 1:
        # one rate: slots and tasks are the same unit, so integral flow is exact
        u = rates.pop() if rates else 1
        slot_flow = transport([ceil_div(d, u) for d in demands], elig, {m: caps[m] for m in task_caps})
        return tuple(slot_flow) if slot_flow is not None else None

    rounded = [{m: ceil_div(y, mu[m]) for m, y in f.items() if y > 0} for f in flow]
    used: dict[int, int] = {}
    for f in rounded:
        for m, n in f.items():
            used[m] = used.get(m, 0) + n
    if all(n <= caps[m] for m, n in used.items()):
        return tuple(rounded)

    # round down, then search only the small leftover problem on the spare slots
    floor = [{m: y // mu[m] for m, y in f.items() if y >= mu[m]} for f in flow]
    spare = dict(caps)
    for f in floor:
        for m, n in f.items():
            spare[m] -= n
    rest = [max(d - sum(n * mu[m] for m, n in f.items()), 0) for d, f in zip(demands, floor)]
    try:
        patch = _branch_and_bound(rest, elig, spare, mu, REPAIR_NODE_LIMIT)
    except _Exhausted:
        patch = None
    if patch is not None:
        return tuple({m: f.get(m, 0) + p.get(m, 0) for m in f.keys() | p.keys()} for f, p in zip(floor, patch))

    try:
        return _branch_and_bound(demands, elig, caps, mu, node_limit)
    except _Exhausted:
        return milp_slots(demands, elig, caps, mu)


def milp_slots(demands: Sequence[int], eligible: Sequence[Sequence[int]], caps: Mapping[int, int],
               mu: Mapping[int, int]) -> Witness | None:
    """Same question as :func:`find_slots`, answered by HiGHS (fewest slots overall)."""
    edges = [(k, m) for k, servers in enumerate(eligible) for m in servers if caps.get(m, 0) > 0]
    if not edges:
        return None if any(d > 0 for d in demands) else tuple({} for _ in demands)
    servers = sorted({m for _, m in edges})
    row = {m: len(demands) + i for i, m in enumerate(servers)}
    A = np.zeros((len(demands) + len(servers), len(edges)))
    for j, (k, m) in enumerate(edges):
        A[k, j] = mu[m]
        A[row[m], j] = 1
    lower = [*demands, *([0] * len(servers))]
    upper = [*([np.inf] * len(demands)), *(caps[m] for m in servers)]
    res = milp(np.ones(len(edges)), constraints=LinearConstraint(A, lower, upper),
               integrality=np.ones(len(edges)), bounds=Bounds(0, np.inf))
    if res.status == 2:
        return None
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed on a slot feasibility probe: {res.message}")
    out: list[dict[int, int]] = [{} for _ in demands]
    for (k, m), x in zip(edges, res.x):
        n = int(round(x))
        if n:
            out[k][m] = n
    return tuple(out)


def _branch_and_bound(demands, elig, caps, mu, node_limit):
    K = len(demands)
    order = sorted((k for k in range(K) if demands[k] > 0), key=lambda k: (len(elig[k]), -demands[k], k))
    caps = {m: caps[m] for e in elig for m in e}
    alloc: list[dict[int, int]] = [{} for _ in range(K)]
    tail_servers = []
    for pos in range(len(order)):
        tail_servers.append(tuple(sorted({m for k in order[pos:] for m in elig[k]})))
    failed: set = set()
    nodes = 0

    def relaxed(pos, partial=None):
        ds = [demands[k] for k in order[pos:]]
        es = [elig[k] for k in order[pos:]]
        if partial is not None:
            ds.append(partial[0])
            es.append(partial[1])
        return transport(ds, es, {m: caps[m] * mu[m] for m in caps}) is not None

    def place_group(pos):
        if pos == len(order):
            return True
        key = (pos, tuple(caps[m] for m in tail_servers[pos]))
        if key in failed:
            return False
        k = order[pos]
        if place_server(pos, k, 0, demands[k]):
            return True
        failed.add(key)
        return False

    def place_server(pos, k, j, need):
        nonlocal nodes
        nodes += 1
        if node_limit is not None and nodes > node_limit:
            raise _Exhausted
        servers = elig[k]
        if need <= 0:
            if pos + 1 < len(order) and not relaxed(pos + 1):
                return False
            return place_group(pos + 1)
        if j == len(servers):
            return False
        m = servers[j]
        u = mu[m]
        rest = sum(caps[s] * mu[s] for s in servers[j + 1:])
        hi = min(caps[m], ceil_div(need, u))
        lo = max(0, ceil_div(need - rest, u))
        for n in range(hi, lo - 1, -1):
            caps[m] -= n
            if n:
                alloc[k][m] = n
            left = need - n * u
            if left <= 0 or relaxed(pos + 1, (left, servers[j + 1:])):
                if place_server(pos, k, j + 1, left):
                    return True
            caps[m] += n
            alloc[k].pop(m, None)
        return False

    if place_group(0):
        return tuple(alloc)
    return None


@dataclass(frozen=True)
class LinearSubproblem:
    """Program P with ``phi`` confined to ``[lo, hi)``, where spare capacity is linear."""
    demands: tuple[int, ...]
    eligible: tuple[tuple[int, ...], ...]
    servers: Mapping[int, tuple[int, int, bool]]  # m -> (busy, mu, active)
    lo: int
    hi: int

    @classmethod
    def for_range(cls, problem: Problem, lo: int, hi: int) -> "LinearSubproblem":
        servers = {m: (problem.busy[m], problem.mu[m], problem.busy[m] <= lo) for m in problem.job.servers}
        return cls(tuple(g.task_count for g in problem.groups),
                   tuple(g.available_servers for g in problem.groups), servers, lo, hi)

    def caps(self, phi: int) -> dict[int, int]:
        return {m: (phi - b if active else 0) for m, (b, _, active) in self.servers.items()}

    @property
    def mu(self) -> dict[int, int]:
        return {m: u for m, (_, u, _) in self.servers.items()}


def feasible_at(p: LinearSubproblem, phi: int, node_limit: int | None = DEFAULT_NODE_LIMIT) -> tuple[bool, Witness | None]:
    if not p.lo <= phi < p.hi:
        raise ValueError(f"phi {phi} outside subrange [{p.lo}, {p.hi})")
    w = find_slots(p.demands, p.eligible, p.caps(phi), p.mu, node_limit)
    return w is not None, w


def solve_subrange(p: LinearSubproblem, node_limit: int | None = DEFAULT_NODE_LIMIT) -> tuple[int, Witness] | None:
    """Minimal feasible ``phi`` in the subrange with its slot witness, or None.

    Feasibility is monotone in ``phi``, so the search gallops up from the
    bottom of the range (steps 1, 2, 4, ...) and then bisects the last step.
    Starting low pays off when the range begins at a tight lower bound.
    """
    last = p.hi - 1
    below = p.lo - 1  # highest level known infeasible
    step = 1
    probe = p.lo
    while True:
        ok, w = feasible_at(p, probe, node_limit)
        if ok:
            break
        if probe == last:
            return None
        below = probe
        probe = min(probe + step, last)
        step *= 2
    hi, best = probe, w
    lo = below + 1
    while lo < hi:
        mid = (lo + hi) // 2
        ok, w = feasible_at(p, mid, node_limit)
        if ok:
            hi, best = mid, w
        else:
            lo = mid + 1
    return hi, best


def level_witness(problem: Problem, witness: Witness, passes: int = 3) -> Witness:
    """Rebalance a feasible witness without raising its completion level.

    Each group in turn is lifted out and water-filled back onto its servers
    with every other group held fixed. A group's old slots show that this
    level is no higher than before, so the overall level never rises, while
    load drains off the servers that the search happened to fill first.
    """
    mu = problem.mu
    slots = [dict(w) for w in witness]
    level = dict(problem.busy)
    for w in slots:
        for m, n in w.items():
            level[m] += n
    for _ in range(passes):
        changed = False
        for g, w in zip(problem.groups, slots):
            for m, n in w.items():
                level[m] -= n
            servers = g.available_servers
            x = min_slots(g.task_count, [(level[m], mu[m]) for m in servers])
            new = {m: x - level[m] for m in servers if x > level[m]}
            surplus = sum(n * mu[m] for m, n in new.items()) - g.task_count
            for m in sorted(new, key=lambda s: (-mu[s], s)):
                cut = min(new[m], surplus // mu[m])
                if cut:
                    new[m] -= cut
                    surplus -= cut * mu[m]
            new = {m: n for m, n in new.items() if n}
            if new != w:
                changed = True
                w.clear()
                w.update(new)
            for m, n in w.items():
                level[m] += n
        if not changed:
            break
    return tuple(slots)


def slots_to_assignment(problem: Problem, phi: int, witness: Witness) -> Assignment:
    """Turn slot counts into task counts in ascending server order.

    Each server takes ``slots * mu`` tasks until the group is exhausted; the
    last server with slots takes whatever is left.
    """
    alloc = {}
    for g, slots in zip(problem.groups, witness):
        left = g.task_count
        places = []
        for m in sorted(slots):
            n = slots[m]
            if n <= 0 or left <= 0:
                continue
            t = min(left, n * problem.mu[m])
            left -= t
            places.append(Placement(m, n, t))
        if left:
            raise ValueError(f"witness leaves {left} tasks of group {g.group_index} unplaced")
        alloc[g.group_index] = tuple(places)
    return Assignment(problem.job.id, alloc, phi)


def plan_makespan(problem: Problem, counts: Mapping[tuple[int, int], int]) -> int:
    """Completion level of a task allocation ``{(group_index, server): tasks}``.

    Each group's share on a server is rounded up to whole slots on its own.
    """
    slots: dict[int, int] = {}
    for (_, m), t in counts.items():
        if t > 0:
            slots[m] = slots.get(m, 0) + ceil_div(t, problem.mu[m])
    return max(problem.busy[m] + s for m, s in slots.items())


def counts_to_assignment(problem: Problem, counts: Mapping[tuple[int, int], int]) -> Assignment:
    alloc = {}
    for g in problem.groups:
        alloc[g.group_index] = tuple(
            Placement(m, ceil_div(counts[g.group_index, m], problem.mu[m]), counts[g.group_index, m])
            for m in g.available_servers if counts.get((g.group_index, m), 0) > 0)
    return Assignment(problem.job.id, alloc, plan_makespan(problem, counts))


def _compositions(n: int, parts: int):
    """All ways to write ``n`` as an ordered sum of ``parts`` non-negative integers."""
    for cuts in itertools.combinations(range(n + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(n + parts - 1 - prev - 1)
        yield out


def enumeration_size(problem: Problem) -> int:
    return math.prod(math.comb(g.task_count + len(g.available_servers) - 1, len(g.available_servers) - 1)
                     for g in problem.groups)


def brute_force_opt(problem: Problem, max_leaves: int = 2_000_000) -> tuple[int, Assignment]:
    """Exhaustive minimum over every split of each group's tasks among its servers.

    Only for small instances; raises ``ValueError`` past ``max_leaves`` splits.
    """
    size = enumeration_size(problem)
    if size > max_leaves:
        raise ValueError(f"instance too large for brute force ({size} > {max_leaves} allocations)")
    groups = problem.groups
    splits = [list(_compositions(g.task_count, len(g.available_servers))) for g in groups]
    busy, mu = problem.busy, problem.mu
    best = None
    best_choice = None
    slots = {m: 0 for m in problem.job.servers}

    def walk(i, current_max):
        nonlocal best, best_choice
        if best is not None and current_max >= best:
            return
        if i == len(groups):
            best, best_choice = current_max, list(chosen)
            return
        servers = groups[i].available_servers
        for split in splits[i]:
            top = current_max
            for m, t in zip(servers, split):
                if t:
                    slots[m] += ceil_div(t, mu[m])
                    top = max(top, busy[m] + slots[m])
            chosen.append(split)
            walk(i + 1, top)
            chosen.pop()
            for m, t in zip(servers, split):
                if t:
                    slots[m] -= ceil_div(t, mu[m])

    chosen: list[list[int]] = []
    walk(0, 0)
    counts = {(g.group_index, m): t for g, split in zip(groups, best_choice)
              for m, t in zip(g.available_servers, split) if t}
    return best, counts_to_assignment(problem, counts)
