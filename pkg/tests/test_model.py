from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condreach.generate import random_mdp
from condreach.model import (
    Action,
    Mdp,
    ModelError,
    Query,
    induce_chain,
    parse_model,
    restrict_to_reachable,
    serialize_model,
    to_fraction,
    validate,
)

SMALL = """\
@type mdp
@states 3
@initial 0
@label goal: 1
0 a : 1=1/2 2=0.5   # comment
0 b : 2=1
1 a : 1=1
2 a : 2=1
"""


def test_parse_small_model():
    m = parse_model(SMALL)
    assert m.num_states == 3
    assert m.initial == 0
    assert m.label("goal") == {1}
    assert m.actions[0][0].dist == ((1, Fraction(1, 2)), (2, Fraction(1, 2)))
    assert m.action_index(0, "b") == 1
    assert m.size == 5
    assert not m.is_chain()


def test_decimal_probabilities_are_exact():
    assert to_fraction("0.1") == Fraction(1, 10)
    assert to_fraction("1/3") == Fraction(1, 3)
    with pytest.raises(ValueError):
        to_fraction("1/x")
    with pytest.raises(ValueError):
        to_fraction("1/0")


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("@states 1\n0 a : 0=1\n", "@type"),
        ("@type mdp\n0 a : 0=1\n", "@states"),
        ("@type mdp\n@states 2\n0 a : 1=1/2\n1 a : 1=1\n", "sum"),
        ("@type mdp\n@states 1\n0 a : 3=1\n", "dangling"),
        ("@type mdp\n@states 2\n0 a : 1=1\n", "without actions"),
        ("@type mdp\n@states 1\n0 a : 0=1\n0 a : 0=1\n", "duplicate"),
        ("@type mdp\n@states 1\n0 a : 0=x\n", "malformed"),
        ("@type mdp\n@states 1\n@label g: 4\n0 a : 0=1\n", "unknown states"),
        ("@type ctmc\n@states 1\n0 a : 0=1\n", "unsupported"),
        ("@type mdp\n@states 1\n@frobnicate\n0 a : 0=1\n", "unknown directive"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ModelError) as err:
        parse_model(text)
    assert fragment in str(err.value)


def test_validate_lists_every_problem():
    m = Mdp(((Action("a", ((5, Fraction(1, 2)),)),), ()), 0)
    with pytest.raises(ModelError) as err:
        validate(m)
    assert len(err.value.diagnostics) == 3


def test_colors_are_parsed(models_dir):
    m = parse_model((models_dir / "colored_family.mdp").read_text())
    assert m.colors[1] == m.colors[2]
    assert m.colors[0] != m.colors[1]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 9), st.booleans())
def test_serialize_round_trip(seed, n, acyclic):
    m = random_mdp(seed, n, 3, acyclic=acyclic)
    again = parse_model(serialize_model(m))
    assert again == m


def test_induce_chain_and_reachability():
    m = parse_model(SMALL)
    chain = induce_chain(m, {0: 1, 1: 0, 2: 0})
    assert chain.is_chain()
    assert chain.actions[0][0].name == "b"
    sub, index = restrict_to_reachable(chain)
    assert sub.num_states == 2
    assert index == {0: 0, 2: 1}
    assert sub.label("goal") == frozenset()
    with pytest.raises(ModelError):
        induce_chain(m, {0: 0})


def test_query_validation():
    with pytest.raises(ValueError):
        Query(frozenset(), frozenset(), direction="sideways")
    with pytest.raises(ValueError):
        Query(frozenset(), frozenset(), threshold=Fraction(3, 2))
    with pytest.raises(ModelError):
        Query(frozenset({7}), frozenset()).check_states(parse_model(SMALL))
