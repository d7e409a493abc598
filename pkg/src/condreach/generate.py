"""Seeded random models for benchmarks and oracle tests."""

from __future__ import annotations

import random
from fractions import Fraction

from .model import Action, Mdp, validate

__all__ = ["random_distribution", "random_mdp", "random_colored", "random_instance"]


def random_distribution(rng: random.Random, targets: list[int], max_den: int = 8) -> tuple:
    """Distribution over ``targets`` with denominators at most ``max_den``."""
    targets = sorted(set(targets))
    if len(targets) == 1:
        return ((targets[0], Fraction(1)),)
    den = rng.randint(len(targets), max(max_den, len(targets)))
    # split den units among targets, each getting at least one
    cuts = sorted(rng.sample(range(1, den), len(targets) - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [den])]
    return tuple((t, Fraction(k, den)) for t, k in zip(targets, parts))


def random_mdp(
    seed: int | random.Random,
    states: int,
    actions: int = 2,
    *,
    acyclic: bool = False,
    fanout: int = 2,
    max_den: int = 8,
    back_edges: float = 0.3,
    self_loops: float = 0.15,
) -> Mdp:
    """A random MDP with labels ``goal`` and ``evidence``.

    Acyclic models are layered: every edge goes to a higher index and the
    last state is an absorbing sink.  Cyclic models additionally get back
    edges and self-loops.  Goal and evidence states are drawn from the
    non-sink states and may overlap.
    """
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    if states < 3:
        raise ValueError("need at least 3 states")
    sink = states - 1
    rows = []
    for s in range(states):
        if s == sink:
            rows.append((Action("loop", ((s, Fraction(1)),)),))
            continue
        acts = []
        for i in range(rng.randint(1, actions)):
            forward = list(range(s + 1, states))
            succ = rng.sample(forward, min(fanout, len(forward)))
            if not acyclic:
                if rng.random() < back_edges and s > 0:
                    succ[-1] = rng.randrange(0, s)
                if rng.random() < self_loops:
                    succ[0] = s
            acts.append(Action(f"a{i}", random_distribution(rng, succ, max_den)))
        rows.append(tuple(acts))
    inner = list(range(1, sink)) or [0]
    goal = set(rng.sample(inner, rng.randint(1, max(1, len(inner) // 3))))
    evid = set(rng.sample(inner, rng.randint(1, max(1, len(inner) // 3))))
    m = Mdp(tuple(rows), 0, {"goal": frozenset(goal), "evidence": frozenset(evid)})
    validate(m)
    return m


def random_colored(seed: int | random.Random, states: int, actions: int = 2, colors: int = 3, **kw) -> Mdp:
    """Random MDP whose states with ``actions`` actions share a few colors."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    base = random_mdp(rng, states, actions, **kw)
    # give every non-sink state exactly ``actions`` actions so colors are uniform
    rows = []
    for s, acts in enumerate(base.actions):
        if s == states - 1:
            rows.append(acts)
            continue
        acts = list(acts)
        while len(acts) < actions:
            extra = rng.sample(range(states), min(2, states))
            acts.append(Action(f"a{len(acts)}", random_distribution(rng, extra)))
        rows.append(tuple(acts))
    color_of = {s: f"c{rng.randrange(colors)}" for s in range(states - 1)}
    m = Mdp(tuple(rows), 0, dict(base.labels), color_of)
    validate(m)
    return m


def random_instance(seed: int, max_states: int = 10, max_actions: int = 3, **kw) -> Mdp:
    """Random size and shape from one seed."""
    rng = random.Random(seed)
    return random_mdp(rng, rng.randint(3, max_states), rng.randint(1, max_actions), **kw)
