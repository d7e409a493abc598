from __future__ import annotations

import itertools
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from condreach import fixtures
from condreach.fixtures import build
from condreach.generate import random_mdp
from condreach.graph import (
    attractor_policy,
    bfs_distance,
    closed_reach,
    is_acyclic,
    maximal_end_components,
    prob_one_max,
    prob_zero_min,
    reach_positive_max,
    topological_order,
)

H = Fraction(1, 2)


def _end_components_brute(m):
    """Maximal end components by enumerating state subsets (tiny models)."""
    found = []
    n = m.num_states
    for k in range(n, 0, -1):
        for sub in itertools.combinations(range(n), k):
            sub = set(sub)
            if any(sub <= f for f in found):
                continue
            avail = {s: [a for a in m.actions[s] if set(a.support) <= sub] for s in sub}
            if not all(avail.values()):
                continue
            # strongly connected under the staying actions
            ok = True
            for s in sub:
                seen, stack = {s}, [s]
                while stack:
                    u = stack.pop()
                    for a in avail[u]:
                        for t in a.support:
                            if t not in seen:
                                seen.add(t)
                                stack.append(t)
                if seen != sub:
                    ok = False
                    break
            if ok:
                found.append(sub)
    return sorted(map(frozenset, found), key=sorted)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 6))
def test_qualitative_sets_match_brute_force(seed, n):
    m = random_mdp(seed, n, 2)
    target = m.label("goal")
    best = oracles.optimal_reach(m, target, "max")
    worst = oracles.optimal_reach(m, target, "min")
    assert reach_positive_max(m, target) == {s for s in m.states() if best[s] > 0}
    assert prob_one_max(m, target) == {s for s in m.states() if best[s] == 1}
    assert prob_zero_min(m, target) == {s for s in m.states() if worst[s] == 0}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 6))
def test_mecs_match_brute_force(seed, n):
    m = random_mdp(seed, n, 2)
    mecs = maximal_end_components(m)
    got = sorted((states for states, _ in mecs.blocks), key=sorted)
    assert got == _end_components_brute(m)
    for k, (states, retained) in enumerate(mecs.blocks):
        for s in states:
            assert mecs.block_of[s] == k
            assert retained[s]
            for i in retained[s]:
                assert set(m.actions[s][i].support) <= states


def test_topological_order_ignores_self_loops():
    m = fixtures.two_exit_model()
    order = topological_order(m)
    assert order is not None
    pos = {s: i for i, s in enumerate(order)}
    for s in m.states():
        for t in m.successors(s) - {s}:
            assert pos[t] < pos[s]
    chain = fixtures.chain_pair(3)
    assert topological_order(chain)[-1] == chain.initial
    ping = build([[("a", {1: 1})], [("a", {0: 1})]])
    assert topological_order(ping) is None
    assert not is_acyclic(ping)


def test_bfs_distance_and_closed_reach():
    m = fixtures.two_exit_model()
    assert bfs_distance(m, 0) == {0: 0, 1: 1, 2: 1, 3: 1, 4: 2, 5: 2}
    region = frozenset({0, 1, 2, 3})
    assert closed_reach(m, 0, region) == region
    assert closed_reach(m, 4, region) == frozenset()


def test_attractor_moves_closer():
    m = fixtures.two_exit_model()
    usable = {s: range(len(m.actions[s])) for s in (0, 1, 2)}
    choice = attractor_policy(m, 2, usable)
    assert choice == {0: 0, 1: 0}
    choice = attractor_policy(m, {4}, usable)
    assert choice[1] == 1 and choice[2] == 1 and choice[0] == 0
