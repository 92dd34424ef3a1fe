import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlsched.assigners import TheoremInstance
from dlsched.estimation import phi_bounds, subranges
from dlsched.ilp import (LinearSubproblem, brute_force_opt, enumeration_size, feasible_at, find_slots,
                         level_witness, milp_slots, plan_makespan, slots_to_assignment, solve_subrange, transport)
from dlsched.model import Problem, validate_assignment

from helpers import exhaustive_slots, instance_a, random_problem


def _covers(witness, demands, eligible, caps, mu):
    used = {}
    for w, d, e in zip(witness, demands, eligible):
        assert set(w) <= set(e)
        assert all(n >= 0 for n in w.values())
        assert sum(n * mu[m] for m, n in w.items()) >= d
        for m, n in w.items():
            used[m] = used.get(m, 0) + n
    assert all(n <= caps.get(m, 0) for m, n in used.items())


def _random_slot_instance(rng):
    m = rng.randint(1, 3)
    servers = list(range(1, m + 1))
    k = rng.randint(1, 3)
    eligible = [tuple(sorted(rng.sample(servers, rng.randint(1, m)))) for _ in range(k)]
    demands = [rng.randint(1, 8) for _ in range(k)]
    caps = {s: rng.randint(0, 3) for s in servers}
    mu = {s: rng.randint(1, 3) for s in servers}
    return demands, eligible, caps, mu


def test_transport_simple():
    flow = transport([3, 2], [(1, 2), (2, 3)], {1: 2, 2: 1, 3: 2})
    assert flow is not None
    assert sum(flow[0].values()) >= 3 and sum(flow[1].values()) >= 2
    assert transport([6], [(1, 2)], {1: 2, 2: 3}) is None


def test_find_slots_matches_exhaustive():
    rng = random.Random(0)
    for _ in range(600):
        demands, eligible, caps, mu = _random_slot_instance(rng)
        w = find_slots(demands, eligible, caps, mu, node_limit=None)
        assert (w is not None) == exhaustive_slots(demands, eligible, caps, mu)
        if w is not None:
            _covers(w, demands, eligible, caps, mu)


def test_milp_agrees_with_search():
    rng = random.Random(1)
    for _ in range(300):
        demands, eligible, caps, mu = _random_slot_instance(rng)
        a = find_slots(demands, eligible, caps, mu, node_limit=None)
        b = milp_slots(demands, eligible, caps, mu)
        assert (a is None) == (b is None)
        if b is not None:
            _covers(b, demands, eligible, caps, mu)


def test_tiny_node_budget_falls_back_correctly():
    rng = random.Random(2)
    for _ in range(300):
        demands, eligible, caps, mu = _random_slot_instance(rng)
        a = find_slots(demands, eligible, caps, mu, node_limit=None)
        b = find_slots(demands, eligible, caps, mu, node_limit=1)
        assert (a is None) == (b is None)
        if b is not None:
            _covers(b, demands, eligible, caps, mu)


def test_solve_subrange_balanced():
    p = LinearSubproblem((4,), ((1, 2),), {1: (0, 1, True), 2: (0, 1, True)}, 2, 10)
    phi, w = solve_subrange(p)
    assert phi == 2
    assert w[0] == {1: 2, 2: 2}


def test_solve_subrange_shortfall():
    p = LinearSubproblem((100,), ((1,),), {1: (0, 1, True)}, 2, 3)
    assert solve_subrange(p) is None


def test_solve_subrange_instance_a():
    prob = instance_a()
    phi, w = solve_subrange(LinearSubproblem.for_range(prob, 2, 3))
    assert phi == 2
    a = slots_to_assignment(prob, phi, w)
    assert validate_assignment(prob.job, prob, a) is None


def test_feasible_at_instance_a():
    p = LinearSubproblem.for_range(instance_a(), 1, 3)
    assert feasible_at(p, 1)[0] is False
    ok, w = feasible_at(p, 2)
    assert ok and w is not None
    with pytest.raises(ValueError):
        feasible_at(p, 3)


def test_inactive_servers_get_nothing():
    prob = Problem.build([(2, (1, 2))], busy={1: 0, 2: 5})
    p = LinearSubproblem.for_range(prob, 1, 5)
    assert p.caps(3) == {1: 3, 2: 0}
    phi, w = solve_subrange(p)
    assert phi == 2 and w[0] == {1: 2}


def _linear_min(p):
    for phi in range(p.lo, p.hi):
        if feasible_at(p, phi, None)[0]:
            return phi
    return None


def test_feasibility_monotone_and_search_exact():
    rng = random.Random(3)
    for _ in range(500):
        prob = random_problem(rng)
        for lo, hi in subranges(phi_bounds(prob)):
            p = LinearSubproblem.for_range(prob, lo, hi)
            flags = [feasible_at(p, phi, None)[0] for phi in range(lo, hi)]
            assert flags == sorted(flags)
            got = solve_subrange(p)
            assert (got[0] if got else None) == _linear_min(p)


def test_witnesses_validate():
    rng = random.Random(4)
    for _ in range(300):
        prob = random_problem(rng)
        for lo, hi in subranges(phi_bounds(prob)):
            got = solve_subrange(LinearSubproblem.for_range(prob, lo, hi))
            if got is None:
                continue
            phi, w = got
            assert validate_assignment(prob.job, prob, slots_to_assignment(prob, phi, w)) is None
            lw = level_witness(prob, w)
            a = slots_to_assignment(prob, phi, lw)
            assert validate_assignment(prob.job, prob, a) is None
            break


def test_level_witness_spreads_load():
    prob = Problem.build([(4, (1, 2))])
    assert level_witness(prob, ({1: 4},)) == ({1: 2, 2: 2},)


def test_slots_to_assignment_remainder_on_last_server():
    prob = Problem.build([(5, (1, 2))], mu=2)
    a = slots_to_assignment(prob, 2, ({1: 2, 2: 1},))
    assert [(p.server, p.slots, p.tasks) for p in a.allocations[1]] == [(1, 2, 4), (2, 1, 1)]
    with pytest.raises(ValueError):
        slots_to_assignment(prob, 2, ({1: 1},))


def test_brute_force_examples():
    assert brute_force_opt(instance_a())[0] == 2
    phi, a = brute_force_opt(Problem.build([(3, (1,))]))
    assert phi == 3 and a.tasks_by_server() == {1: 3}


def test_brute_force_theorem_instances():
    assert brute_force_opt(TheoremInstance(2, 2).problem())[0] == 3


def test_brute_force_guard():
    prob = Problem.build([(40, (1, 2, 3, 4, 5, 6))])
    assert enumeration_size(prob) > 1000
    with pytest.raises(ValueError):
        brute_force_opt(prob, max_leaves=1000)


def test_plan_makespan_rounds_each_group():
    prob = Problem.build([(1, (1,)), (1, (1, 2))], mu=2)
    assert plan_makespan(prob, {(1, 1): 1, (2, 1): 1}) == 2


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10_000))
def test_brute_force_assignment_is_valid(seed):
    prob = random_problem(random.Random(seed))
    phi, a = brute_force_opt(prob)
    assert a.phi == phi
    assert validate_assignment(prob.job, prob, a) is None
