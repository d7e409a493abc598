from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from condreach import fixtures
from condreach.fixtures import build
from condreach.generate import random_mdp
from condreach.model import induce_chain
from condreach.solver import (
    SolverError,
    acyclic_dp,
    entry_rewards,
    policy_values,
    reach_prob,
    solve_linear,
    total_reward,
)

F = Fraction


def test_solve_linear_sparse():
    rows = [{0: F(2), 1: F(1)}, {0: F(1), 1: F(3)}]
    assert solve_linear(rows, [F(3), F(5)]) == [F(4, 5), F(7, 5)]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 6), st.sampled_from(["max", "min"]))
def test_reach_prob_matches_policy_enumeration(seed, n, direction):
    m = random_mdp(seed, n, 2)
    target = m.label("goal")
    ref = oracles.optimal_reach(m, target, direction)
    res = reach_prob(m, target, direction, "exact")
    assert res.values == ref
    # the witness attains the optimum from every state
    chain = oracles.induced(m, [res.witness[s] for s in m.states()])
    assert oracles.chain_reach(chain, target) == ref


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 6), st.sampled_from(["max", "min"]))
def test_float_mode_close_to_exact(seed, n, direction):
    m = random_mdp(seed, n, 2)
    target = m.label("goal")
    exact = reach_prob(m, target, direction, "exact").values
    approx = reach_prob(m, target, direction, "float").values
    assert all(abs(float(a) - b) < 1e-4 for a, b in zip(exact, approx))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 12), st.sampled_from(["max", "min"]))
def test_acyclic_dp_agrees_with_general_solver(seed, n, direction):
    m = random_mdp(seed, n, 3, acyclic=True)
    target = m.label("goal")
    a = reach_prob(m, target, direction, method="acyclic")
    g = reach_prob(m, target, direction, method="general")
    assert a.values == g.values
    assert a.iterations == 1


def test_acyclic_dp_rejects_cycles():
    ping = build([[("a", {1: 1})], [("a", {0: F(1, 2), 2: F(1, 2)})], [("a", {2: 1})]])
    with pytest.raises(ValueError):
        acyclic_dp(ping, {}, {2})


def test_chain_pair_single_sweep():
    m = fixtures.chain_pair(5)
    res = reach_prob(m, m.label("goal"))
    assert res.iterations == 1
    # half the mass enters the upper chain, which halves it five more times
    assert res.values[m.initial] == F(1, 2) ** 6


def test_total_reward_end_components():
    # 0 can loop forever (a), or pay -1 (b) / +2 (c) on entering 1
    m = build([[("a", {0: 1}), ("b", {1: 1}), ("c", {0: F(1, 2), 1: F(1, 2)})], [("a", {1: 1})]])
    rew = {(0, 1, 1): F(-1), (0, 2, 1): F(2)}
    assert total_reward(m, rew, {1}, "max").values[0] == 2
    assert total_reward(m, rew, {1}, "min").values[0] == -1
    # staying forever earns 0
    assert total_reward(m, {(0, 1, 1): F(-1)}, {1}, "max").values[0] == 0
    with pytest.raises(SolverError):
        total_reward(build([[("a", {0: 1})], [("a", {1: 1})]]), {}, {1}, allow_stay=False)


def test_reward_contract_is_checked():
    m = build([[("a", {1: 1})], [("a", {2: 1})], [("a", {2: 1})]])
    with pytest.raises(ValueError):
        total_reward(m, {(0, 0, 1): F(1)}, {2})


def test_entry_rewards_and_policy_values():
    m = fixtures.two_exit_model()
    rew = entry_rewards(m, {4: F(1, 6), 5: F(-1, 2)}, skip={3, 4, 5})
    assert rew[(2, 1, 4)] == F(1, 6)
    assert rew[(2, 1, 5)] == F(-1, 2)
    assert all(t in (4, 5) for (_, _, t) in rew)
    chain = induce_chain(m, {0: 0, 1: 1, 2: 1, 3: 0, 4: 0, 5: 0})
    vals = policy_values(chain, {0: 0, 1: 0, 2: 0, 3: 0, 4: 0, 5: 0}, entry_rewards(chain, {4: F(1)}, skip={3, 4, 5}), {3, 4, 5})
    assert vals[1] == 1
    assert vals[2] == F(2, 3)
