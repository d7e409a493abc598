"""Property-based checks over random models."""

from __future__ import annotations

import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import query_for
from condreach.bisection import optimize
from condreach.conditional import build_transform, check_defined, evaluate_policy, probe
from condreach.generate import random_distribution, random_mdp
from condreach.graph import is_acyclic
from condreach.model import Action, Mdp, validate

F = Fraction
seeds = st.integers(0, 10**6)


@settings(max_examples=100, deadline=None)
@given(seeds, st.lists(st.integers(0, 20), min_size=1, max_size=6, unique=True))
def test_random_distribution_is_exact(seed, targets):
    dist = random_distribution(random.Random(seed), targets)
    assert sum(p for _, p in dist) == 1
    assert sorted(t for t, _ in dist) == sorted(targets)
    assert all(p > 0 for _, p in dist)
    assert all(p.denominator <= max(8, len(targets)) for _, p in dist)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(3, 15), st.integers(1, 3))
def test_generator_contract(seed, n, k):
    m = random_mdp(seed, n, k, acyclic=True)
    validate(m)
    assert is_acyclic(m)
    assert all(1 <= len(acts) <= k for acts in m.actions)
    sink = n - 1
    assert sink not in m.label("goal") | m.label("evidence")
    assert random_mdp(seed, n, k, acyclic=True) == m


def _permute(m: Mdp, perm: list[int]) -> Mdp:
    inv = {old: new for new, old in enumerate(perm)}
    acts = tuple(
        tuple(Action(a.name, tuple(sorted((inv[t], p) for t, p in a.dist))) for a in m.actions[old])
        for old in perm
    )
    labels = {k: frozenset(inv[s] for s in v) for k, v in m.labels.items()}
    return Mdp(acts, inv[m.initial], labels)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["max", "min"]))
def test_optimum_invariant_under_relabelling(seed, direction):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(3, 8), 2)
    if not check_defined(m, m.label("evidence")):
        return
    perm = list(m.states())
    rng.shuffle(perm)
    other = _permute(m, perm)
    assert optimize(m, query_for(m, direction)).value == optimize(other, query_for(other, direction)).value


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["max", "min"]))
def test_unreachable_states_do_not_matter(seed, direction):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(3, 8), 2)
    if not check_defined(m, m.label("evidence")):
        return
    n = m.num_states
    # an unreachable state that would jump straight to the goal and evidence
    ev = min(m.label("evidence"))
    extra = (Action("x", ((ev, F(1)),)),)
    bigger = Mdp(m.actions + (extra,), m.initial, {**m.labels, "goal": m.label("goal") | {n}})
    validate(bigger)
    assert optimize(m, query_for(m, direction)).value == optimize(bigger, query_for(bigger, direction)).value


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_chains_have_a_single_value(seed):
    # without choices the minimal and maximal conditional probability coincide
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(3, 8), 1)
    if not check_defined(m, m.label("evidence")):
        return
    lo = optimize(m, query_for(m, "min")).value
    hi = optimize(m, query_for(m, "max")).value
    assert lo == hi


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["max", "min"]))
def test_witness_attains_optimum(seed, direction):
    rng = random.Random(seed)
    m = random_mdp(rng, rng.randint(3, 9), 3)
    q = query_for(m, direction)
    if not check_defined(m, q.evidence):
        return
    res = optimize(m, q)
    assert evaluate_policy(m, res.witness, q) == res.value
    assert probe(build_transform(m, q), res.value).sign == 0
