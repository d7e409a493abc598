from __future__ import annotations

import random
from fractions import Fraction

import pytest

import oracles
from condreach import fixtures
from condreach.colored import (
    ColoredMdp,
    FamilyTooLarge,
    enumerate_family,
    is_consistent,
    split,
    synthesize,
)
from condreach.conditional import check_defined
from condreach.fixtures import build
from condreach.generate import random_colored
from condreach.model import ModelError, Query

F = Fraction

OPS = {">=": F.__ge__, ">": F.__gt__, "<=": F.__le__, "<": F.__lt__}


def _query(m, comparison, lam, mode="exact"):
    return Query(m.label("goal"), m.label("evidence"), mode=mode, comparison=comparison, threshold=F(lam))


def test_family_basics():
    cm = ColoredMdp.from_mdp(fixtures.colored_pair())
    assert cm.colors == ["c0", "c12", "c3", "c4", "c5"]
    assert cm.family_size() == 4
    members = enumerate_family(cm)
    assert len(members) == 4
    assert all(not is_consistent(cm, s) for s in members)
    clash = is_consistent(cm, {0: 0, 1: 0, 2: 1})
    assert len(clash) == 1 and clash[0].color == "c12"
    left, right = split(cm, "c12", 0)
    assert left.allowed["c12"] == {0} and right.allowed["c12"] == {1}
    with pytest.raises(ValueError):
        split(left, "c12", 0)
    with pytest.raises(FamilyTooLarge):
        enumerate_family(cm, cap=3)


def test_uncolored_states_get_fresh_colors():
    cm = ColoredMdp.from_mdp(fixtures.two_exit_model())
    assert len(cm.colors) == 6
    bad = build([[("a", {1: 1}), ("b", {1: 1})], [("a", {1: 1})]], colors={0: "c", 1: "c"})
    with pytest.raises(ModelError):
        ColoredMdp.from_mdp(bad)


def test_family_infeasible_at_three_fifths():
    m = fixtures.colored_pair()
    res = synthesize(ColoredMdp.from_mdp(m), _query(m, ">=", F(3, 5)))
    assert not res.feasible
    assert res.nodes == 3
    root, first, second = res.trace
    assert root.outcome == "split" and root.bound == F(2, 3)
    assert {first.outcome, second.outcome} == {"unreachable", "bound"}
    assert [r.bound for r in res.trace if r.outcome == "bound"] == [F(5, 9)]


def test_family_feasible_at_one_half():
    m = fixtures.colored_pair()
    res = synthesize(ColoredMdp.from_mdp(m), _query(m, ">=", F(1, 2)))
    assert res.feasible and res.value == F(5, 9)
    assert res.witness[1] == res.witness[2]
    assert oracles.member_value(m, [res.witness[s] for s in m.states()], m.label("goal"), m.label("evidence")) == F(5, 9)
    assert res.iterations_per_second > 0


def test_uncolored_synthesis_is_existential_check():
    m = fixtures.two_exit_model()
    cm = ColoredMdp.from_mdp(m)
    assert synthesize(cm, _query(m, ">=", F(2, 3))).feasible
    assert not synthesize(cm, _query(m, ">", F(2, 3))).feasible


def test_synthesis_rejects_equality_and_missing_threshold():
    m = fixtures.colored_pair()
    cm = ColoredMdp.from_mdp(m)
    with pytest.raises(ValueError):
        synthesize(cm, _query(m, "=", F(1, 2)))
    with pytest.raises(ValueError):
        synthesize(cm, Query(m.label("goal"), m.label("evidence")))


def _random_colored_cases(count):
    out = []
    seed = 0
    while len(out) < count:
        rng = random.Random(seed)
        m = random_colored(rng, rng.randint(3, 7), 2, colors=rng.randint(1, 3))
        seed += 1
        cm = ColoredMdp.from_mdp(m)
        if cm.family_size() > 64 or not check_defined(m, m.label("evidence")):
            continue
        out.append((seed - 1, m, rng))
    return out


def test_synthesis_matches_family_enumeration():
    for seed, m, rng in _random_colored_cases(50):
        goal, evid = m.label("goal"), m.label("evidence")
        cm = ColoredMdp.from_mdp(m)
        colors = [cm.color_of[s] for s in m.states()]
        values = [oracles.member_value(m, p, goal, evid) for p in oracles.colored_members(m, colors)]
        defined = [v for v in values if v is not None]
        probes = sorted(set(defined) | {F(rng.randint(0, 8), 8)})
        for lam in probes:
            for comparison in (">=", ">", "<=", "<"):
                expected = any(OPS[comparison](v, lam) for v in defined)
                res = synthesize(cm, _query(m, comparison, lam))
                assert res.feasible == expected, (seed, comparison, lam)
                if res.feasible:
                    w = [res.witness[s] for s in m.states()]
                    assert not is_consistent(cm, res.witness)
                    assert OPS[comparison](oracles.member_value(m, w, goal, evid), lam)


def test_float_synthesis_on_family():
    m = fixtures.colored_pair()
    cm = ColoredMdp.from_mdp(m)
    assert synthesize(cm, _query(m, ">=", F(1, 2), "float")).feasible
    assert not synthesize(cm, _query(m, ">=", F(3, 5), "float")).feasible
