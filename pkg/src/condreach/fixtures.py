"""Small hand-built models used by the examples, the CLI and the tests."""

from __future__ import annotations

from fractions import Fraction

from .model import Action, Mdp, validate

__all__ = ["build", "two_exit_model", "chain_pair", "colored_pair", "min_corner"]

F = Fraction


def build(rows, initial=0, labels=None, colors=None) -> Mdp:
    """Build an MDP from ``rows[s] = [(name, {t: p}), ...]``."""
    acts = tuple(
        tuple(Action(name, tuple(sorted((t, F(p)) for t, p in dist.items()))) for name, dist in row)
        for row in rows
    )
    labels = {k: frozenset(v) for k, v in (labels or {}).items()}
    m = Mdp(acts, initial, labels, dict(colors or {}))
    validate(m)
    return m


def two_exit_model() -> Mdp:
    """Six states (0-based s1..s6); goal {3}, evidence {4, 5}.

    The optimum ``Pr^max(<>goal | <>evidence)`` is 2/3.
    """
    h = F(1, 2)
    rows = [
        [("alpha", {1: h, 2: h}), ("beta", {3: 1})],
        [("alpha", {2: 1}), ("beta", {4: h, 1: h})],
        [("alpha", {2: 1}), ("beta", {4: F(2, 3), 5: F(1, 3)})],
        [("loop", {3: 1})],
        [("a", {3: F(2, 3), 5: F(1, 3)})],
        [("loop", {5: 1})],
    ]
    return build(rows, 0, {"goal": {3}, "evidence": {4, 5}})


def chain_pair(n: int) -> Mdp:
    """Two parallel halving chains of length ``n``: one ends in the goal
    (which then leads to the evidence), the other directly in the evidence.

    States: 0 initial, ``1..n`` upper chain, ``n+1..2n`` lower chain,
    ``2n+1`` goal, ``2n+2`` evidence, ``2n+3`` sink.  The conditional
    probability of the goal given the evidence is 1/2.
    """
    if n < 1:
        raise ValueError("n must be positive")
    h = F(1, 2)
    goal, evid, sink = 2 * n + 1, 2 * n + 2, 2 * n + 3
    rows: list = [[("a", {1: h, n + 1: h})]]
    for i in range(1, n + 1):
        rows.append([("a", {i + 1 if i < n else goal: h, sink: h})])
    for i in range(n + 1, 2 * n + 1):
        rows.append([("a", {i + 1 if i < 2 * n else evid: h, sink: h})])
    rows.append([("a", {evid: 1})])
    rows.append([("loop", {evid: 1})])
    rows.append([("loop", {sink: 1})])
    return build(rows, 0, {"goal": {goal}, "evidence": {evid}})


def colored_pair() -> Mdp:
    """:func:`two_exit_model` with states 1 and 2 sharing a color."""
    m = two_exit_model()
    colors = {0: "c0", 1: "c12", 2: "c12", 3: "c3", 4: "c4", 5: "c5"}
    return Mdp(m.actions, m.initial, dict(m.labels), colors)


def min_corner() -> Mdp:
    """0 -> goal; goal either reaches the evidence or a sink."""
    rows = [
        [("a", {1: 1})],
        [("alpha", {2: 1}), ("beta", {3: 1})],
        [("loop", {2: 1})],
        [("loop", {3: 1})],
    ]
    return build(rows, 0, {"goal": {1}, "evidence": {2}})
