"""Deciding conditional reachability by reduction to expected total reward.

For a threshold ``lam`` the query ``Pr^dir(<>G | <>E) ~ lam`` is answered by
the sign of

    V(lam) = opt over E-reaching policies of  Pr(<>G and <>E) - lam * Pr(<>E),

which equals an optimal expected total reward on a transformed MDP:

1. ``G`` and ``E`` are made absorbing; entering ``s in E`` pays
   ``Pr_s(<>G) - lam`` and entering ``s in G \\ E`` pays ``Pr_s(<>E) * (1 - lam)``.
2. The terminal set keeps ``E`` and the goal states that can still see ``E``.
3. The initial component (states from which ``T`` can be avoided forever,
   reachable from the initial state while avoiding) is replaced by a
   single choice among its exits; probability mass falling back into it is
   diverted to a fresh sink.

Policies of the original MDP need three memory modes: nothing seen yet,
goal seen, evidence seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .graph import (
    attractor_policy,
    closed_reach,
    prob_zero_min,
    reach_positive_max,
    topological_order,
)
from .model import Action, Mdp, Query
from .solver import (
    Number,
    SolveResult,
    acyclic_dp,
    chain_values,
    entry_rewards,
    reach_prob,
    total_reward,
)

__all__ = [
    "UndefinedError",
    "TransformArtifacts",
    "ThresholdOutcome",
    "ConditionalPolicy",
    "check_defined",
    "make_absorbing",
    "build_transform",
    "entry_values",
    "reward_lambda",
    "probe",
    "threshold_value",
    "min_edge_case",
    "extract_policy",
    "evaluate_policy",
    "policy_probabilities",
    "policies_agree",
    "slack_value",
    "decide",
    "decide_sign",
    "FLOAT_SIGN_TOLERANCE",
]

FLOAT_SIGN_TOLERANCE = 1e-9

NONE, GOAL, EVID, BOTH = 0, 1, 2, 3
_LOOP = "_loop"


class UndefinedError(ValueError):
    """The conditional probability is undefined (evidence unreachable)."""


def check_defined(m: Mdp, evidence) -> bool:
    """True iff some policy reaches ``evidence`` with positive probability."""
    evidence = frozenset(evidence)
    return bool(evidence) and m.initial in reach_positive_max(m, evidence)


def make_absorbing(m: Mdp, states) -> Mdp:
    states = frozenset(states)
    acts = tuple(
        (Action(_LOOP, ((s, Fraction(1)),)),) if s in states else m.actions[s]
        for s in m.states()
    )
    return Mdp(acts, m.initial, dict(m.labels), dict(m.colors))


def _with_pre_initial(m: Mdp) -> Mdp:
    # fresh initial state so that the real initial state can be absorbing
    n = m.num_states
    acts = m.actions + ((Action("_start", ((m.initial, Fraction(1)),)),),)
    return Mdp(acts, n, dict(m.labels), dict(m.colors))


@dataclass(frozen=True)
class ConditionalPolicy:
    """Three-mode policy: ``before`` until G or E is seen, then ``after_goal``
    (G seen, E not yet) or ``after_evidence`` (E seen, G not yet)."""

    before: Mapping[int, int]
    after_goal: Mapping[int, int]
    after_evidence: Mapping[int, int]
    chosen_exit: tuple[int, int] | None = None

    def action(self, mode: int, s: int) -> int:
        if mode == NONE:
            return self.before[s]
        if mode == GOAL:
            return self.after_goal[s]
        if mode == EVID:
            return self.after_evidence[s]
        return 0

    def restrict(self, states) -> ConditionalPolicy:
        keep = set(states)
        pick = lambda d: {s: a for s, a in d.items() if s in keep}  # noqa: E731
        return ConditionalPolicy(
            pick(self.before), pick(self.after_goal), pick(self.after_evidence), self.chosen_exit
        )


@dataclass(frozen=True)
class TransformArtifacts:
    """Everything about a query that does not depend on the threshold.

    ``model`` is the working MDP: the input, plus a fresh initial state when
    the input's initial state is itself a goal or evidence state
    (``pre_initial``).  The threshold-dependent reward is solved on
    ``solve_model``, which is ``tilde`` if the initial component is nonempty
    and ``m_circ`` otherwise; ``to_solve`` maps working states into it.
    """

    query: Query
    model: Mdp
    pre_initial: bool
    m_circ: Mdp
    terminal: frozenset[int]
    goal_reach_evidence: Mapping[int, Number]
    evidence_reach_goal: Mapping[int, Number]
    initial_component: frozenset[int]
    exits: tuple[tuple[int, int], ...]
    tilde: Mdp | None
    bottom: int | None
    state_map_back: Mapping[int, int]
    forced_one: bool
    witness_goal: Mapping[int, int] = field(repr=False)  # optimizes <>G, used after E
    witness_evidence: Mapping[int, int] = field(repr=False)  # optimizes <>E, used after G
    solve_acyclic: bool = False
    solve_order: tuple[int, ...] | None = field(default=None, repr=False)

    @property
    def exact(self) -> bool:
        return self.query.exact

    @property
    def solve_model(self) -> Mdp:
        return self.tilde if self.tilde is not None else self.m_circ

    @property
    def to_solve(self) -> dict[int, int]:
        return {old: new for new, old in self.state_map_back.items()}

    @property
    def solve_terminal(self) -> frozenset[int]:
        to = self.to_solve
        return frozenset(to[s] for s in self.terminal if s in to)

    def original_policy(self, pi: ConditionalPolicy) -> ConditionalPolicy:
        """Drop the fresh initial state, if any."""
        if not self.pre_initial:
            return pi
        return pi.restrict(range(self.model.num_states - 1))


def build_transform(m: Mdp, q: Query) -> TransformArtifacts:
    q.check_states(m)
    if not check_defined(m, q.evidence):
        raise UndefinedError("evidence is unreachable: conditional probability undefined")
    goal, evid = frozenset(q.goal), frozenset(q.evidence)
    pre = m.initial in goal | evid
    work = _with_pre_initial(m) if pre else m
    mode = "exact" if q.exact else "float"

    to_goal = reach_prob(work, goal, q.direction, mode)
    to_evid = reach_prob(work, evid, q.direction, mode)
    m_circ = make_absorbing(work, goal | evid)
    terminal = evid | {s for s in goal - evid if to_evid.values[s] > 0}

    forced = q.direction == "min" and work.initial not in reach_positive_max(m_circ, terminal)
    component: frozenset[int] = frozenset()
    exits: tuple = ()
    tilde = bottom = None
    back = {s: s for s in m_circ.states()}
    if not forced:
        avoid = prob_zero_min(m_circ, terminal)
        component = closed_reach(m_circ, work.initial, avoid)
        exits = tuple(
            (s, i)
            for s in sorted(component)
            for i, a in enumerate(m_circ.actions[s])
            if not all(t in component for t in a.support)
        )
        if component:
            tilde, back, bottom = _eliminate(m_circ, component, exits)
    solve_model = tilde if tilde is not None else m_circ
    solve_terminal = {new for new, old in back.items() if old in terminal}
    order = topological_order(solve_model, [s for s in solve_model.states() if s not in solve_terminal])
    return TransformArtifacts(
        query=q,
        model=work,
        pre_initial=pre,
        m_circ=m_circ,
        terminal=frozenset(terminal),
        goal_reach_evidence={s: to_evid.values[s] for s in goal - evid},
        evidence_reach_goal={s: to_goal.values[s] for s in evid},
        initial_component=component,
        exits=exits,
        tilde=tilde,
        bottom=bottom,
        state_map_back=back,
        forced_one=forced,
        witness_goal=to_goal.witness,
        witness_evidence=to_evid.witness,
        solve_acyclic=order is not None,
        solve_order=tuple(order) if order is not None else None,
    )


def _eliminate(m: Mdp, component: frozenset[int], exits) -> tuple[Mdp, dict[int, int], int]:
    keep = [s for s in m.states() if s not in component]
    index = {s: k for k, s in enumerate(keep)}
    init = len(keep)
    bottom = init + 1

    def redirect(dist):
        out: dict[int, Fraction] = {}
        for t, p in dist:
            k = bottom if t in component else index[t]
            out[k] = out.get(k, Fraction(0)) + p
        return tuple(sorted(out.items()))

    acts = [tuple(Action(a.name, redirect(a.dist)) for a in m.actions[s]) for s in keep]
    acts.append(tuple(Action(f"{m.actions[s][i].name}@{s}", redirect(m.actions[s][i].dist)) for s, i in exits))
    acts.append((Action(_LOOP, ((bottom, Fraction(1)),)),))
    back = {k: s for s, k in index.items()}
    back[init] = m.initial
    return Mdp(tuple(acts), init), back, bottom


def entry_values(t: TransformArtifacts, lam) -> dict[int, Number]:
    """Reward paid on entering each terminal state at threshold ``lam``."""
    if not t.exact:
        lam = float(lam)
    out = {}
    for s in t.terminal:
        if s in t.evidence_reach_goal:
            out[s] = t.evidence_reach_goal[s] - lam
        else:
            out[s] = t.goal_reach_evidence[s] * (1 - lam)
    return out


def reward_lambda(t: TransformArtifacts, lam) -> dict[tuple[int, int, int], Number]:
    """The reward function on ``m_circ`` (working-model indices)."""
    return entry_rewards(t.m_circ, entry_values(t, lam), skip=t.terminal)


def _sign(v: Number, exact: bool) -> int:
    if not exact and abs(v) <= FLOAT_SIGN_TOLERANCE:
        return 0
    return (v > 0) - (v < 0)


@dataclass(frozen=True)
class ThresholdOutcome:
    sign: int
    value: Number
    witness: ConditionalPolicy
    iterations: int = 1
    forced: bool = False


def _solve(model: Mdp, rewards, terminal, direction, mode, order) -> SolveResult:
    if order is not None:
        return acyclic_dp(model, rewards, terminal, direction, mode, order=order)
    return total_reward(model, rewards, terminal, direction, mode)


def probe(t: TransformArtifacts, lam) -> ThresholdOutcome:
    """Sign of ``V(lam)`` using prebuilt artifacts."""
    mode = "exact" if t.exact else "float"
    if t.forced_one:
        value = (Fraction(1) if t.exact else 1.0) - (lam if t.exact else float(lam))
        return ThresholdOutcome(_sign(value, t.exact), value, _forced_witness(t), 1, True)
    to = t.to_solve
    values = {to[s]: v for s, v in entry_values(t, lam).items()}
    model, terminal = t.solve_model, t.solve_terminal
    res = _solve(model, entry_rewards(model, values, skip=terminal), terminal, t.query.direction, mode, t.solve_order)
    value = res.values[model.initial]
    return ThresholdOutcome(_sign(value, t.exact), value, extract_policy(t, res.witness), res.iterations)


def threshold_value(m: Mdp, q: Query, lam) -> ThresholdOutcome:
    return probe(build_transform(m, q), lam)


def decide(outcome: ThresholdOutcome, comparison: str) -> bool:
    """Whether ``Pr^dir(<>G | <>E) ~ lam`` given the sign of ``V(lam)``."""
    return decide_sign(outcome.sign, comparison)


def decide_sign(s: int, comparison: str) -> bool:
    return {"<": s < 0, "<=": s <= 0, "=": s == 0, ">=": s >= 0, ">": s > 0}[comparison]


def min_edge_case(t: TransformArtifacts, q: Query | None = None) -> Fraction | None:
    """Forced value 1 when no E-reaching policy avoids the goal first."""
    q = q or t.query
    if q.direction == "min" and t.forced_one:
        return Fraction(1)
    return None


def _forced_witness(t: TransformArtifacts) -> ConditionalPolicy:
    # every evidence path crosses a goal state first; maximize <>E throughout
    reach_e = reach_prob(t.model, t.query.evidence, "max", "exact" if t.exact else "float").witness
    return ConditionalPolicy(dict(reach_e), dict(reach_e), dict(t.witness_goal))


def extract_policy(t: TransformArtifacts, tilde_witness: Mapping[int, int]) -> ConditionalPolicy:
    """Lift a memoryless witness of the solve model to a three-mode policy."""
    before: dict[int, int] = {}
    chosen = None
    for k, s in t.state_map_back.items():
        if s in t.initial_component:
            continue
        before[s] = tilde_witness[k]
    comp = t.initial_component
    if comp:
        init_k = t.to_solve[t.model.initial]
        chosen = t.exits[tilde_witness[init_k]]
        s_e, a_e = chosen
        inside = {
            s: [i for i, a in enumerate(t.m_circ.actions[s]) if all(u in comp for u in a.support)]
            for s in comp
        }
        route = attractor_policy(t.m_circ, s_e, inside)
        for s in comp:
            if s == s_e:
                before[s] = a_e
            elif s in route:
                before[s] = route[s]
            else:
                before[s] = inside[s][0]
        if t.model.initial != s_e and t.model.initial not in route:
            raise RuntimeError("initial state cannot reach the chosen exit inside the component")
    return ConditionalPolicy(before, dict(t.witness_evidence), dict(t.witness_goal), chosen)


# -- policy evaluation ----------------------------------------------------


def _next_mode(mode: int, t: int, goal, evid) -> int:
    if t in goal:
        mode |= GOAL
    if t in evid:
        mode |= EVID
    return mode


def product_chain(m: Mdp, pi: ConditionalPolicy, goal, evid):
    """Reachable part of the chain ``m x {none, G, E, both}`` under ``pi``.

    Returns ``(states, succ)`` where ``states[k] = (s, mode)`` and
    ``succ[k]`` lists ``(k', p)``; both-seen states are absorbing.
    """
    goal, evid = frozenset(goal), frozenset(evid)
    start = (m.initial, _next_mode(NONE, m.initial, goal, evid))
    index = {start: 0}
    states = [start]
    succ: list[list[tuple[int, Fraction]]] = []
    k = 0
    while k < len(states):
        s, mode = states[k]
        if mode == BOTH:
            succ.append([])
        else:
            a = m.actions[s][pi.action(mode, s)]
            row = []
            for t, p in a.dist:
                nxt = (t, _next_mode(mode, t, goal, evid))
                if nxt not in index:
                    index[nxt] = len(states)
                    states.append(nxt)
                row.append((index[nxt], p))
            succ.append(row)
        k += 1
    return states, succ


def policy_probabilities(m: Mdp, pi: ConditionalPolicy, q: Query) -> tuple[Number, Number]:
    """``(Pr(<>G and <>E), Pr(<>E))`` under ``pi``."""
    states, succ = product_chain(m, pi, q.goal, q.evidence)
    exact = q.exact
    one = Fraction(1) if exact else 1.0
    zero = Fraction(0) if exact else 0.0
    if not exact:
        succ = [[(k, float(p)) for k, p in row] for row in succ]
    reward = [zero] * len(states)
    both = {k: one for k, (_, mode) in enumerate(states) if mode == BOTH}
    seen_e = {k: one for k, (_, mode) in enumerate(states) if mode & EVID}
    a = chain_values(succ, reward, both, exact)[0]
    b = chain_values(succ, reward, seen_e, exact)[0]
    return a, b


def evaluate_policy(m: Mdp, pi: ConditionalPolicy, q: Query) -> Number:
    a, b = policy_probabilities(m, pi, q)
    if b == 0:
        raise UndefinedError("policy reaches the evidence with probability zero")
    return a / b


def policies_agree(m: Mdp, p1: ConditionalPolicy, p2: ConditionalPolicy, q: Query) -> bool:
    """Equal choices on every product state reachable under ``p1``."""
    if p1.chosen_exit != p2.chosen_exit:
        return False
    states, _ = product_chain(m, p1, q.goal, q.evidence)
    for s, mode in states:
        if mode != BOTH and p1.action(mode, s) != p2.action(mode, s):
            return False
    return True


def slack_value(t: TransformArtifacts, lam) -> Number:
    """Optimal total reward of ``R^lam`` on ``m_circ`` over all policies.

    Equals ``V(lam)`` whenever the optimum is attained by an E-reaching
    policy, which holds for ``V(lam) >= 0`` (max) and ``V(lam) <= 0`` (min).
    """
    mode = "exact" if t.exact else "float"
    m = t.m_circ
    order = topological_order(m, [s for s in m.states() if s not in t.terminal])
    res = _solve(m, reward_lambda(t, lam), t.terminal, t.query.direction, mode, order)
    return res.values[m.initial]

