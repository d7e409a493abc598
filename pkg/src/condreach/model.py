"""Explicit-state MDPs with exact rational probabilities.

Models are read from a small line-oriented text format::

    @type mdp
    @states 3
    @initial 0
    @label goal: 2
    @color 1 c0
    0 a : 1=1/2 2=0.5
    1 a : 1=1
    2 a : 2=1

Probabilities are stored as :class:`fractions.Fraction` regardless of the
arithmetic later used for solving.  Action identity is the pair
``(state, ordinal)``; names are only for display and file round trips.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "Action",
    "Mdp",
    "ModelError",
    "Query",
    "parse_model",
    "serialize_model",
    "validate",
    "induce_chain",
    "reachable_states",
    "restrict_to_reachable",
    "to_fraction",
]

DIRECTIONS = ("max", "min")
MODES = ("exact", "float", "eps-exact")
COMPARISONS = {"<": "lt", "<=": "le", "=": "eq", ">=": "ge", ">": "gt"}


class ModelError(ValueError):
    """Raised for malformed model text or a model violating an invariant.

    ``diagnostics`` holds one message per problem found.
    """

    def __init__(self, diagnostics: list[str] | str):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class Action:
    name: str
    dist: tuple[tuple[int, Fraction], ...]

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.dist)

    def prob(self, target: int) -> Fraction:
        for t, p in self.dist:
            if t == target:
                return p
        return Fraction(0)


@dataclass(frozen=True)
class Mdp:
    """An MDP over states ``0..n-1``.

    ``actions[s]`` is the ordered tuple of actions enabled in ``s``.  A Markov
    chain is an MDP with exactly one action per state.  ``colors`` is an
    optional partial map from state to color id (used by colored models).
    """

    actions: tuple[tuple[Action, ...], ...]
    initial: int = 0
    labels: Mapping[str, frozenset[int]] = field(default_factory=dict)
    colors: Mapping[int, str] = field(default_factory=dict)

    @property
    def num_states(self) -> int:
        return len(self.actions)

    @property
    def size(self) -> int:
        """Number of positive-probability transitions ``(s, a, t)``."""
        return sum(len(a.dist) for acts in self.actions for a in acts)

    def states(self) -> range:
        return range(len(self.actions))

    def label(self, name: str) -> frozenset[int]:
        try:
            return self.labels[name]
        except KeyError:
            raise ModelError(f"unknown label {name!r}") from None

    def is_chain(self) -> bool:
        return all(len(acts) == 1 for acts in self.actions)

    def successors(self, s: int) -> set[int]:
        return {t for a in self.actions[s] for t, _ in a.dist}

    def action_index(self, s: int, name: str) -> int:
        for i, a in enumerate(self.actions[s]):
            if a.name == name:
                return i
        raise KeyError(f"state {s} has no action {name!r}")

    def predecessors(self) -> list[set[int]]:
        pred: list[set[int]] = [set() for _ in self.actions]
        for s, acts in enumerate(self.actions):
            for a in acts:
                for t, _ in a.dist:
                    pred[t].add(s)
        return pred


@dataclass(frozen=True)
class Query:
    """A conditional reachability query ``Pr^dir(<>goal | <>evidence)``."""

    goal: frozenset[int]
    evidence: frozenset[int]
    direction: str = "max"
    mode: str = "exact"
    epsilon: Fraction = Fraction(0)
    comparison: str = "<="
    threshold: Fraction | None = None

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.comparison not in COMPARISONS:
            raise ValueError(f"comparison must be one of {tuple(COMPARISONS)}")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.threshold is not None and not 0 <= self.threshold <= 1:
            raise ValueError("threshold must lie in [0, 1]")

    @property
    def exact(self) -> bool:
        return self.mode != "float"

    def check_states(self, m: Mdp) -> None:
        bad = sorted(s for s in self.goal | self.evidence if not 0 <= s < m.num_states)
        if bad:
            raise ModelError(f"query refers to states outside the model: {bad}")


def to_fraction(token: str) -> Fraction:
    """Parse ``num/den`` or a decimal literal exactly."""
    if not _NUMBER.fullmatch(token):
        raise ValueError(f"malformed rational {token!r}")
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed rational {token!r}") from None


_NUMBER = re.compile(r"[+-]?(\d+(/\d+)?|\d*\.\d+|\d+\.\d*)([eE][+-]?\d+)?")
_TRANSITION = re.compile(r"(\d+)\s+(\S+)\s*:\s*(.*)")


def parse_model(text: str) -> Mdp:
    """Parse and validate a model document."""
    n = None
    initial = None
    labels: dict[str, set[int]] = {}
    colors: dict[int, str] = {}
    transitions: dict[int, list[Action]] = {}
    seen_type = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        def fail(msg: str):
            raise ModelError(f"line {lineno}: {msg}")

        if line.startswith("@"):
            key, _, rest = line.partition(" ")
            rest = rest.strip()
            if key == "@type":
                if rest not in ("mdp", "dtmc"):
                    fail(f"unsupported model type {rest!r}")
                seen_type = True
            elif key == "@states":
                if not rest.isdigit():
                    fail("expected a state count")
                n = int(rest)
            elif key == "@initial":
                if not rest.isdigit():
                    fail("expected an initial state index")
                initial = int(rest)
            elif key == "@label":
                name, sep, members = rest.partition(":")
                name = name.strip()
                if not sep or not name:
                    fail("expected '@label <name>: <states>'")
                try:
                    states = {int(tok) for tok in members.split()}
                except ValueError:
                    fail("label members must be state indices")
                labels.setdefault(name, set()).update(states)
            elif key == "@color":
                parts = rest.split()
                if len(parts) != 2 or not parts[0].isdigit():
                    fail("expected '@color <state> <colorId>'")
                colors[int(parts[0])] = parts[1]
            else:
                fail(f"unknown directive {key}")
            continue

        match = _TRANSITION.fullmatch(line)
        if not match:
            fail("expected '<state> <action> : <succ>=<prob> ...'")
        state, name, body = int(match.group(1)), match.group(2), match.group(3)
        dist: dict[int, Fraction] = {}
        for tok in body.split():
            succ, eq, prob = tok.partition("=")
            if not eq or not succ.isdigit():
                fail(f"malformed branch {tok!r}")
            try:
                p = to_fraction(prob)
            except ValueError as exc:
                fail(str(exc))
            if p <= 0 or p > 1:
                fail(f"probability {prob} outside (0, 1]")
            dist[int(succ)] = dist.get(int(succ), Fraction(0)) + p
        if not dist:
            fail("action without successors")
        acts = transitions.setdefault(state, [])
        if any(a.name == name for a in acts):
            fail(f"duplicate action {name!r} for state {state}")
        total = sum(dist.values())
        if total != 1:
            fail(f"probabilities of state {state} action {name!r} sum to {total}, not 1")
        acts.append(Action(name, tuple(sorted(dist.items()))))

    if not seen_type:
        raise ModelError("missing '@type mdp' header")
    if n is None:
        raise ModelError("missing '@states' directive")
    if initial is None:
        initial = 0
    bad_states = sorted(s for s in transitions if s >= n)
    if bad_states:
        raise ModelError(f"transitions for undeclared states {bad_states}")
    m = Mdp(
        actions=tuple(tuple(transitions.get(s, ())) for s in range(n)),
        initial=initial,
        labels={k: frozenset(v) for k, v in labels.items()},
        colors=dict(colors),
    )
    validate(m)
    return m


def serialize_model(m: Mdp) -> str:
    lines = ["@type mdp", f"@states {m.num_states}", f"@initial {m.initial}"]
    for name in sorted(m.labels):
        members = " ".join(str(s) for s in sorted(m.labels[name]))
        lines.append(f"@label {name}: {members}".rstrip())
    for s in sorted(m.colors):
        lines.append(f"@color {s} {m.colors[s]}")
    for s, acts in enumerate(m.actions):
        for a in acts:
            branches = " ".join(f"{t}={p}" for t, p in a.dist)
            lines.append(f"{s} {a.name} : {branches}")
    return "\n".join(lines) + "\n"


def validate(m: Mdp) -> None:
    """Raise :class:`ModelError` listing every violated invariant."""
    problems = []
    n = m.num_states
    if n == 0:
        problems.append("model has no states")
    if not 0 <= m.initial < max(n, 1):
        problems.append(f"initial state {m.initial} out of range")
    for s, acts in enumerate(m.actions):
        if not acts:
            problems.append(f"state without actions: {s}")
        names = set()
        for a in acts:
            if a.name in names:
                problems.append(f"duplicate action {a.name!r} in state {s}")
            names.add(a.name)
            for t, p in a.dist:
                if not 0 <= t < n:
                    problems.append(f"dangling successor {t} of state {s} action {a.name!r}")
                if not 0 < p <= 1:
                    problems.append(f"probability {p} outside (0, 1] at state {s} action {a.name!r}")
            total = sum(p for _, p in a.dist)
            if total != 1:
                problems.append(f"distribution of state {s} action {a.name!r} sums to {total}")
    for name, members in m.labels.items():
        out = sorted(s for s in members if not 0 <= s < n)
        if out:
            problems.append(f"label {name!r} refers to unknown states {out}")
    out = sorted(s for s in m.colors if not 0 <= s < n)
    if out:
        problems.append(f"colors given for unknown states {out}")
    if problems:
        raise ModelError(problems)


def induce_chain(m: Mdp, policy: Mapping[int, int]) -> Mdp:
    """The Markov chain obtained by fixing ``policy[s]`` in every state."""
    missing = [s for s in m.states() if s not in policy]
    if missing:
        raise ModelError(f"policy undefined on states {missing}")
    acts = []
    for s in m.states():
        i = policy[s]
        if not 0 <= i < len(m.actions[s]):
            raise ModelError(f"invalid action index {i} for state {s}")
        acts.append((m.actions[s][i],))
    return Mdp(tuple(acts), m.initial, dict(m.labels), dict(m.colors))


def reachable_states(m: Mdp, sources: Iterable[int] | None = None) -> set[int]:
    """States reachable from ``sources`` (default: the initial state)."""
    start = [m.initial] if sources is None else list(sources)
    seen = set(start)
    queue = deque(start)
    while queue:
        s = queue.popleft()
        for t in m.successors(s):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def restrict_to_reachable(m: Mdp) -> tuple[Mdp, dict[int, int]]:
    """Drop unreachable states; returns the new model and old->new index map."""
    keep = sorted(reachable_states(m))
    index = {s: i for i, s in enumerate(keep)}
    acts = tuple(
        tuple(Action(a.name, tuple((index[t], p) for t, p in a.dist)) for a in m.actions[s])
        for s in keep
    )
    labels = {k: frozenset(index[s] for s in v if s in index) for k, v in m.labels.items()}
    colors = {index[s]: c for s, c in m.colors.items() if s in index}
    return Mdp(acts, index[m.initial], labels, colors), index
