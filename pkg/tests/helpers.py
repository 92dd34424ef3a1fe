"""Shared instance generators and small reference implementations for the tests."""
from __future__ import annotations

import itertools
import random

from dlsched.model import Problem


def random_sets(rng: random.Random, servers: int, count: int) -> list[tuple[int, ...]]:
    """Up to ``count`` distinct non-empty subsets of ``1..servers``."""
    universe = [s for r in range(1, servers + 1) for s in itertools.combinations(range(1, servers + 1), r)]
    return rng.sample(universe, min(count, len(universe)))


def random_problem(rng: random.Random, max_servers: int = 4, max_groups: int = 3, max_tasks: int = 10,
                   mu_max: int = 3, b_max: int = 4) -> Problem:
    """A small instance: at most ``max_tasks`` tasks over at most ``max_groups`` groups."""
    m = rng.randint(1, max_servers)
    sets = random_sets(rng, m, rng.randint(1, max_groups))
    total = rng.randint(len(sets), max(len(sets), max_tasks))
    cuts = sorted(rng.sample(range(1, total), len(sets) - 1))
    sizes = [b - a for a, b in zip([0, *cuts], [*cuts, total])]
    busy = {s: rng.randint(0, b_max) for s in range(1, m + 1)}
    mu = {s: rng.randint(1, mu_max) for s in range(1, m + 1)}
    return Problem.build(list(zip(sizes, sets)), busy=busy, mu=mu)


def scan_min_slots(demand, servers):
    """Smallest level by counting up from zero."""
    x = 0
    while sum((x - b) * u for b, u in servers if x > b) < demand:
        x += 1
    return x


def exhaustive_slots(demands, eligible, caps, mu):
    """Whether integer slots exist, by trying every per-group slot vector."""
    def options(k):
        servers = eligible[k]
        ranges = [range(0, caps.get(m, 0) + 1) for m in servers]
        for combo in itertools.product(*ranges):
            if sum(n * mu[m] for n, m in zip(combo, servers)) >= demands[k]:
                yield dict(zip(servers, combo))

    def walk(k, used):
        if k == len(demands):
            return True
        for opt in options(k):
            if all(used.get(m, 0) + n <= caps.get(m, 0) for m, n in opt.items()):
                nxt = dict(used)
                for m, n in opt.items():
                    nxt[m] = nxt.get(m, 0) + n
                if walk(k + 1, nxt):
                    return True
        return False

    return walk(0, {})


INSTANCE_A = dict(groups=[(3, (1, 2)), (2, (2, 3))], busy={1: 0, 2: 1, 3: 0}, mu=1)


def instance_a() -> Problem:
    return Problem.build(**INSTANCE_A)
