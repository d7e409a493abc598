"""Color-consistent policy synthesis for conditional reachability.

A colored MDP assigns each state a color; a policy is color-consistent when
all states of one color pick the same action index.  Consistent memoryless
policies correspond to the members of a Markov chain family.  The search is
an abstraction-refinement loop: the unrestricted optimum of a sub-family
bounds all its members; an inconsistent optimal witness is used to split the
sub-family on one color.
"""

from __future__ import annotations

import itertools
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .bisection import BisectionConfig, optimize
from .conditional import (
    BOTH,
    ConditionalPolicy,
    UndefinedError,
    check_defined,
    evaluate_policy,
    product_chain,
)
from .graph import bfs_distance
from .model import Mdp, ModelError, Query

__all__ = [
    "ColoredMdp",
    "Conflict",
    "NodeRecord",
    "SynthesisResult",
    "is_consistent",
    "enumerate_family",
    "split",
    "synthesize",
    "FamilyTooLarge",
]

FLOAT_DISCARD_MARGIN = 1e-9


class FamilyTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ColoredMdp:
    """``base`` with a total coloring and per-color allowed action indices."""

    base: Mdp
    color_of: Mapping[int, str]
    allowed: Mapping[str, frozenset[int]]

    @classmethod
    def from_mdp(cls, m: Mdp) -> ColoredMdp:
        color_of = {}
        for s in m.states():
            color_of[s] = m.colors.get(s, f"_s{s}")
        width: dict[str, int] = {}
        for s, c in color_of.items():
            k = len(m.actions[s])
            if width.setdefault(c, k) != k:
                raise ModelError(f"states of color {c!r} have different numbers of actions")
        allowed = {c: frozenset(range(k)) for c, k in width.items()}
        return cls(m, color_of, allowed)

    @property
    def colors(self) -> list[str]:
        """Colors ordered by their first state."""
        seen: dict[str, None] = {}
        for s in self.base.states():
            seen.setdefault(self.color_of[s], None)
        return list(seen)

    def allowed_at(self, s: int) -> list[int]:
        return sorted(self.allowed[self.color_of[s]])

    def restrict(self, color: str, actions) -> ColoredMdp:
        allowed = dict(self.allowed)
        allowed[color] = frozenset(actions)
        return ColoredMdp(self.base, self.color_of, allowed)

    def sub_mdp(self) -> Mdp:
        """The MDP keeping only allowed actions (indices renumbered)."""
        m = self.base
        acts = tuple(tuple(m.actions[s][i] for i in self.allowed_at(s)) for s in m.states())
        return Mdp(acts, m.initial, dict(m.labels), dict(m.colors))

    def family_size(self) -> int:
        size = 1
        for c in self.colors:
            size *= len(self.allowed[c])
        return size


@dataclass(frozen=True)
class Conflict:
    color: str
    state: int
    other: int
    action: int
    other_action: int


def is_consistent(cm: ColoredMdp, sigma: Mapping[int, int], domain=None) -> list[Conflict]:
    """Every pair of same-colored domain states choosing different actions.

    An empty list means ``sigma`` is consistent on ``domain``.
    """
    domain = sorted(sigma if domain is None else domain)
    first: dict[str, int] = {}
    conflicts = []
    for s in domain:
        c = cm.color_of[s]
        if c not in first:
            first[c] = s
        elif sigma[first[c]] != sigma[s]:
            r = first[c]
            conflicts.append(Conflict(c, r, s, sigma[r], sigma[s]))
    return conflicts


def enumerate_family(cm: ColoredMdp, cap: int = 64) -> list[dict[int, int]]:
    """All consistent memoryless policies, ordered by color then action."""
    if cm.family_size() > cap:
        raise FamilyTooLarge(f"family has {cm.family_size()} members, cap is {cap}")
    colors = cm.colors
    out = []
    for combo in itertools.product(*(sorted(cm.allowed[c]) for c in colors)):
        pick = dict(zip(colors, combo))
        out.append({s: pick[cm.color_of[s]] for s in cm.base.states()})
    return out


def split(cm: ColoredMdp, color: str, action: int) -> tuple[ColoredMdp, ColoredMdp]:
    """Children enforcing ``action`` at ``color`` and excluding it."""
    rest = cm.allowed[color] - {action}
    if action not in cm.allowed[color] or not rest:
        raise ValueError("split must leave both children nonempty")
    return cm.restrict(color, {action}), cm.restrict(color, rest)


@dataclass
class NodeRecord:
    depth: int
    allowed: dict[str, tuple[int, ...]]
    outcome: str  # unreachable | bound | feasible | split | inconclusive
    bound: Fraction | float | None = None
    split_color: str | None = None
    split_action: int | None = None


@dataclass
class SynthesisResult:
    feasible: bool
    witness: dict[int, int] | None
    value: Fraction | float | None
    nodes: int
    elapsed: float
    trace: list[NodeRecord] = field(default_factory=list)

    @property
    def iterations_per_second(self) -> float:
        return self.nodes / self.elapsed if self.elapsed > 0 else float("inf")


def _compare(value, lam, comparison: str) -> bool:
    return {
        ">=": value >= lam,
        ">": value > lam,
        "<=": value <= lam,
        "<": value < lam,
    }[comparison]


def _reachable_choices(cm: ColoredMdp, sub: Mdp, pi: ConditionalPolicy, q: Query) -> dict[int, set[int]]:
    # base action indices used at product-reachable decision points
    states, _ = product_chain(sub, pi, q.goal, q.evidence)
    used: dict[int, set[int]] = {}
    for s, mode in states:
        if mode == BOTH:
            continue
        used.setdefault(s, set()).add(cm.allowed_at(s)[pi.action(mode, s)])
    return used


def _conflicts(cm: ColoredMdp, used: Mapping[int, set[int]]) -> dict[str, Counter]:
    per_color: dict[str, Counter] = {}
    for s, acts in used.items():
        per_color.setdefault(cm.color_of[s], Counter()).update(acts)
    return {c: cnt for c, cnt in per_color.items() if len(cnt) > 1}


def synthesize(cm: ColoredMdp, q: Query, *, cap_nodes: int | None = None) -> SynthesisResult:
    """Is there a consistent policy whose conditional value satisfies the threshold?

    ``q.comparison`` of ``>=``/``>`` bounds the family from above with the
    maximal conditional probability; ``<=``/``<`` use the minimal one.
    """
    if q.threshold is None:
        raise ValueError("synthesis needs a threshold")
    if q.comparison not in (">=", ">", "<=", "<"):
        raise ValueError("synthesis supports <, <=, >=, >")
    direction = "max" if q.comparison.startswith(">") else "min"
    qd = Query(q.goal, q.evidence, direction, q.mode, q.epsilon, q.comparison, q.threshold)
    exact = qd.exact
    lam = q.threshold if exact else float(q.threshold)
    cfg = BisectionConfig("pt-std", mode="exact" if exact else "float")
    distance = bfs_distance(cm.base, cm.base.initial)
    start = time.perf_counter()
    trace: list[NodeRecord] = []
    stack: list[tuple[ColoredMdp, int]] = [(cm, 0)]

    def done(feasible, witness=None, value=None):
        return SynthesisResult(feasible, witness, value, len(trace), time.perf_counter() - start, trace)

    while stack:
        if cap_nodes is not None and len(trace) >= cap_nodes:
            break
        node, depth = stack.pop()
        rec = NodeRecord(depth, {c: tuple(sorted(a)) for c, a in node.allowed.items()}, "")
        trace.append(rec)
        sub = node.sub_mdp()
        if not check_defined(sub, qd.evidence):
            rec.outcome = "unreachable"
            continue
        res = optimize(sub, qd, cfg)
        bound = res.value if exact else (res.upper if direction == "max" else res.lower)
        rec.bound = bound
        if exact:
            hopeless = not _compare(bound, lam, q.comparison)
        elif direction == "max":
            hopeless = float(bound) < lam - FLOAT_DISCARD_MARGIN
        else:
            hopeless = float(bound) > lam + FLOAT_DISCARD_MARGIN
        if hopeless:
            rec.outcome = "bound"
            continue
        used = _reachable_choices(node, sub, res.witness, qd)
        clashes = _conflicts(node, used)
        if not clashes:
            sigma = {}
            for c in node.colors:
                picks = {a for s, acts in used.items() if node.color_of[s] == c for a in acts}
                choice = min(picks) if picks else min(node.allowed[c])
                for s in node.base.states():
                    if node.color_of[s] == c:
                        sigma[s] = choice
            member = ConditionalPolicy(sigma, sigma, sigma)
            try:
                value = evaluate_policy(node.base, member, qd)
            except UndefinedError:
                value = None
            if value is not None and _compare(value, lam, q.comparison):
                rec.outcome = "feasible"
                return done(True, sigma, value)
            rec.outcome = "inconclusive"
            continue
        # refine the conflicting color that is farthest from the initial state
        far = max(
            (s for s in used if node.color_of[s] in clashes),
            key=lambda s: (distance.get(s, -1), -s),
        )
        color = node.color_of[far]
        counts = clashes[color]
        action = min(counts)
        enforced, rest = split(node, color, action)
        rec.outcome = "split"
        rec.split_color, rec.split_action = color, action
        majority = max(counts.values())
        enforced_first = counts[action] == majority
        first, second = (enforced, rest) if enforced_first else (rest, enforced)
        stack.append((second, depth + 1))
        stack.append((first, depth + 1))
    return done(False)
