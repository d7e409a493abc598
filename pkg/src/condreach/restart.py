"""The restart method: conditional reachability as plain reachability.

The MDP is unfolded with two flags (goal seen, evidence seen).  While the
evidence has not been seen, probability mass entering a state that can no
longer reach the evidence is sent back to the initial state, and states
from which the evidence can be avoided get an extra ``restart`` action.
Policies that reach the evidence almost surely then realise exactly the
conditional distribution, so the optimum of ``<>goal`` over those policies
is the optimal conditional probability.  This is the baseline the
total-reward method is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .conditional import UndefinedError, check_defined
from .graph import prob_one_max, prob_zero_min, reach_positive_max
from .model import Action, Mdp, Query
from .solver import Number, SolveResult, reach_prob, total_reward

__all__ = ["RestartModel", "build_restart", "solve_restart", "solve_restart_full", "RESTART", "GOAL_STATE"]

RESTART = "restart"
GOAL_STATE = "goal"


@dataclass(frozen=True)
class RestartModel:
    """``mdp`` over product states ``keys[k] = (s, goal_seen, evidence_seen)``.

    All states with both flags set are merged into the absorbing ``goal``
    state, whose key is ``"goal"``.
    """

    mdp: Mdp
    keys: tuple
    goal: int
    evidence_seen: frozenset[int]

    @property
    def initial_is_goal(self) -> bool:
        return self.mdp.initial == self.goal


def build_restart(m: Mdp, q: Query) -> RestartModel:
    q.check_states(m)
    if not check_defined(m, q.evidence):
        raise UndefinedError("evidence is unreachable: conditional probability undefined")
    goal, evid = frozenset(q.goal), frozenset(q.evidence)
    can_see = reach_positive_max(m, evid)
    can_avoid = prob_zero_min(m, evid)

    def key_of(t, g, e):
        g, e = g or t in goal, e or t in evid
        return GOAL_STATE if g and e else (t, g, e)

    init_key = key_of(m.initial, False, False)
    index = {init_key: 0}
    keys: list = [init_key]

    def target(t, g, e):
        k = key_of(t, g, e)
        if k != GOAL_STATE and not k[2] and t not in can_see:
            return 0
        if k not in index:
            index[k] = len(keys)
            keys.append(k)
        return index[k]

    rows: list[tuple[Action, ...]] = []
    k = 0
    while k < len(keys):
        key = keys[k]
        if key == GOAL_STATE:
            rows.append((Action("_loop", ((k, Fraction(1)),)),))
        else:
            s, g, e = key
            acts = []
            for a in m.actions[s]:
                dist: dict[int, Fraction] = {}
                for t, p in a.dist:
                    j = target(t, g, e)
                    dist[j] = dist.get(j, Fraction(0)) + p
                acts.append(Action(a.name, tuple(sorted(dist.items()))))
            if not e and s in can_avoid:
                acts.append(Action(RESTART, ((0, Fraction(1)),)))
            rows.append(tuple(acts))
        k += 1
    goal_idx = index.get(GOAL_STATE)
    if goal_idx is None:
        # goal never reachable together with the evidence: add it unreachable
        goal_idx = len(keys)
        keys.append(GOAL_STATE)
        rows.append((Action("_loop", ((goal_idx, Fraction(1)),)),))
    seen = frozenset(i for i, key in enumerate(keys) if key == GOAL_STATE or key[2])
    return RestartModel(Mdp(tuple(rows), 0), tuple(keys), goal_idx, seen)


def solve_restart(m: Mdp, q: Query, mode: str | None = None) -> Number:
    """Optimal conditional probability via the restart model."""
    return solve_restart_full(m, q, mode)[0]


def solve_restart_full(m: Mdp, q: Query, mode: str | None = None) -> tuple[Number, SolveResult, RestartModel]:
    mode = mode or ("exact" if q.exact else "float")
    exact = mode != "float"
    r = build_restart(m, q)
    one = Fraction(1) if exact else 1.0
    if r.initial_is_goal:
        return one, SolveResult([one], {0: 0}, 0, mode), r
    to_goal = reach_prob(m, q.goal, q.direction, mode).values
    final = {}
    for i in r.evidence_seen:
        key = r.keys[i]
        final[i] = one if key == GOAL_STATE else to_goal[key[0]]
    # only policies that see the evidence almost surely are meaningful
    sure = prob_one_max(r.mdp, r.evidence_seen)
    rows = []
    for i, acts in enumerate(r.mdp.actions):
        if i in r.evidence_seen or i not in sure:
            rows.append((Action("_loop", ((i, Fraction(1)),)),))
        else:
            rows.append(tuple(a for a in acts if all(t in sure for t in a.support)))
    restricted = Mdp(tuple(rows), 0)
    rewards = {}
    for i, acts in enumerate(restricted.actions):
        if i in r.evidence_seen:
            continue
        for j, a in enumerate(acts):
            for t, _ in a.dist:
                if t in r.evidence_seen and final[t]:
                    rewards[(i, j, t)] = final[t]
    res = total_reward(restricted, rewards, r.evidence_seen, q.direction, mode, allow_stay=False)
    return res.values[0], res, r
