"""Optimal reachability probabilities and expected total rewards.

Exact mode runs policy iteration with rational Gaussian elimination; float
mode runs value iteration with a relative stopping criterion (no soundness
guarantee).  Both operate on the quotient obtained by collapsing the
maximal end components of the non-terminal states, which makes the Bellman
fixed point unique even with mixed-sign rewards.  Acyclic models are solved
with a single backward sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .graph import (
    attractor_policy,
    maximal_end_components,
    prob_zero_min,
    reach_positive_max,
    topological_order,
)
from .model import Mdp

__all__ = [
    "SolveResult",
    "RewardFunction",
    "reach_prob",
    "total_reward",
    "acyclic_dp",
    "policy_values",
    "solve_linear",
    "chain_values",
    "entry_rewards",
    "FLOAT_TOLERANCE",
]

Number = Union[Fraction, float]
RewardFunction = Mapping[tuple[int, int, int], Number]

FLOAT_TOLERANCE = 1e-6
MAX_VI_ITERATIONS = 1_000_000


class SolverError(RuntimeError):
    pass


@dataclass
class SolveResult:
    values: list[Number]
    witness: dict[int, int]
    iterations: int
    mode: str
    converged: bool = True

    def __getitem__(self, s: int) -> Number:
        return self.values[s]


def entry_rewards(m: Mdp, reward_of: Mapping[int, Number], skip: Iterable[int] = ()) -> dict:
    """Reward function paying ``reward_of[t]`` on every transition into ``t``.

    Transitions leaving states in ``skip`` get no reward.
    """
    skip = set(skip)
    rew = {}
    for s, acts in enumerate(m.actions):
        if s in skip:
            continue
        for i, a in enumerate(acts):
            for t, _ in a.dist:
                r = reward_of.get(t)
                if r:
                    rew[(s, i, t)] = r
    return rew


# -- linear algebra -------------------------------------------------------


def solve_linear(rows: Sequence[dict[int, Number]], rhs: Sequence[Number]) -> list[Number]:
    """Solve ``A x = b`` for sparse rows ``A[i] = {j: a_ij}``.

    Elimination pivots on the diagonal, which is safe for the nonsingular
    M-matrices ``I - P`` arising from transient chains.
    """
    n = len(rows)
    a = [dict(r) for r in rows]
    b = list(rhs)
    col_rows: list[set[int]] = [set() for _ in range(n)]
    for i, r in enumerate(a):
        for j in r:
            col_rows[j].add(i)
    for k in range(n):
        piv = a[k].get(k, 0)
        if piv == 0:
            raise SolverError("singular system")
        row_k = a[k]
        for i in list(col_rows[k]):
            if i <= k:
                continue
            factor = a[i][k] / piv
            row_i = a[i]
            for j, v in row_k.items():
                nv = row_i.get(j, 0) - factor * v
                if nv == 0:
                    if j in row_i:
                        del row_i[j]
                        col_rows[j].discard(i)
                else:
                    if j not in row_i:
                        col_rows[j].add(i)
                    row_i[j] = nv
            row_i.pop(k, None)
            col_rows[k].discard(i)
            b[i] = b[i] - factor * b[k]
    x: list[Number] = [0] * n
    for k in range(n - 1, -1, -1):
        acc = b[k]
        for j, v in a[k].items():
            if j != k:
                acc -= v * x[j]
        x[k] = acc / a[k][k]
    return x


def chain_values(
    succ: Sequence[Sequence[tuple[int, Number]]],
    reward: Sequence[Number],
    fixed: Mapping[int, Number],
    exact: bool = True,
) -> list[Number]:
    """Expected accumulated reward in a Markov chain until hitting ``fixed``.

    ``reward[s]`` is the expected one-step reward of ``s``; states in
    ``fixed`` take the given value.  States that cannot reach a fixed state
    accumulate nothing and get value zero.
    """
    n = len(succ)
    zero = Fraction(0) if exact else 0.0
    pred: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        if s in fixed:
            continue
        for t, _ in succ[s]:
            pred[t].append(s)
    live = set(fixed)
    stack = list(fixed)
    while stack:
        t = stack.pop()
        for s in pred[t]:
            if s not in live:
                live.add(s)
                stack.append(s)
    values = [zero] * n
    for s, v in fixed.items():
        values[s] = v
    unknown = sorted(s for s in live if s not in fixed)
    index = {s: k for k, s in enumerate(unknown)}
    rows, rhs = [], []
    for s in unknown:
        row: dict[int, Number] = {index[s]: 1 if exact else 1.0}
        b = reward[s]
        for t, p in succ[s]:
            p = p if exact else float(p)
            if t in index:
                row[index[t]] = row.get(index[t], 0) - p
            elif t in fixed:
                b = b + p * fixed[t]
        rows.append({j: v for j, v in row.items() if v != 0})
        rhs.append(b)
    if unknown:
        for s, v in zip(unknown, solve_linear(rows, rhs)):
            values[s] = v
    return values


def policy_values(
    m: Mdp,
    policy: Mapping[int, int],
    rewards: RewardFunction,
    terminal: Iterable[int],
    exact: bool = True,
) -> list[Number]:
    """Expected total reward until ``terminal`` under a memoryless policy."""
    terminal = set(terminal)
    zero = Fraction(0) if exact else 0.0
    succ, reward = [], []
    for s in m.states():
        if s in terminal:
            succ.append(())
            reward.append(zero)
            continue
        i = policy[s]
        a = m.actions[s][i]
        succ.append(a.dist)
        r = zero
        for t, p in a.dist:
            rv = rewards.get((s, i, t))
            if rv:
                r += (p if exact else float(p)) * (rv if exact else float(rv))
        reward.append(r)
    return chain_values(succ, reward, {t: zero for t in terminal}, exact)


# -- quotient construction ------------------------------------------------


@dataclass
class _Choice:
    state: int | None  # None: stay inside the end component forever
    action: int | None
    reward: Number
    succ: list[tuple[int, Number]] = field(default_factory=list)


@dataclass
class _Quotient:
    node_of: dict[int, int]
    members: list[list[int]]
    retained: list[Mapping[int, tuple[int, ...]] | None]
    choices: list[list[_Choice]]


def _check_reward_contract(m: Mdp, rewards: RewardFunction, terminal: frozenset[int]):
    for (s, i, t), r in rewards.items():
        if r and t not in terminal and s not in terminal:
            raise ValueError(
                f"reward {r} on transition ({s}, {i}, {t}) not entering a terminal state"
            )


def _build_quotient(m, rewards, terminal, exact, allow_stay) -> _Quotient:
    nonterminal = [s for s in m.states() if s not in terminal]
    mecs = maximal_end_components(m, nonterminal)
    node_of: dict[int, int] = {}
    members: list[list[int]] = []
    retained: list = []
    for states, kept in mecs.blocks:
        for s in states:
            node_of[s] = len(members)
        members.append(sorted(states))
        retained.append(kept)
    for s in nonterminal:
        if s not in node_of:
            node_of[s] = len(members)
            members.append([s])
            retained.append(None)

    conv = (lambda v: v) if exact else float
    zero = Fraction(0) if exact else 0.0
    choices: list[list[_Choice]] = []
    for k, states in enumerate(members):
        kept = retained[k]
        opts = []
        for s in states:
            for i, a in enumerate(m.actions[s]):
                if kept is not None and i in kept[s]:
                    continue
                r = zero
                agg: dict[int, Number] = {}
                for t, p in a.dist:
                    rv = rewards.get((s, i, t))
                    if rv:
                        r += conv(p) * conv(rv)
                    if t not in terminal:
                        n = node_of[t]
                        agg[n] = agg.get(n, zero) + conv(p)
                opts.append(_Choice(s, i, r, sorted(agg.items())))
        if kept is not None and allow_stay:
            opts.append(_Choice(None, None, zero))
        if not opts:
            raise SolverError(f"end component {states} has no exit and staying is not allowed")
        choices.append(opts)
    return _Quotient(node_of, members, retained, choices)


def _q_value(c: _Choice, x: Sequence[Number]) -> Number:
    v = c.reward
    for n, p in c.succ:
        v += p * x[n]
    return v


def _better(direction: str):
    return (lambda a, b: a > b) if direction == "max" else (lambda a, b: a < b)


def _policy_iteration(q: _Quotient, direction: str) -> tuple[list, list[int], int]:
    better = _better(direction)
    n = len(q.choices)
    policy = [0] * n
    iterations = 0
    while True:
        iterations += 1
        succ = [q.choices[k][policy[k]].succ for k in range(n)]
        reward = [q.choices[k][policy[k]].reward for k in range(n)]
        x = _solve_policy(succ, reward)
        changed = False
        for k in range(n):
            qs = [_q_value(c, x) for c in q.choices[k]]
            best = qs[0]
            for v in qs[1:]:
                if better(v, best):
                    best = v
            if better(best, qs[policy[k]]):
                policy[k] = qs.index(best)
                changed = True
        if not changed:
            return x, policy, iterations


def _solve_policy(succ, reward) -> list:
    n = len(succ)
    rows = []
    for k in range(n):
        row = {k: Fraction(1)}
        for t, p in succ[k]:
            row[t] = row.get(t, 0) - p
        rows.append({j: v for j, v in row.items() if v != 0})
    return solve_linear(rows, reward) if n else []


def _value_iteration(q: _Quotient, direction: str, tolerance: float, max_iterations: int):
    better = _better(direction)
    n = len(q.choices)
    x = [0.0] * n
    iterations = 0
    converged = False
    while iterations < max_iterations:
        iterations += 1
        new = []
        for k in range(n):
            best = None
            for c in q.choices[k]:
                v = _q_value(c, x)
                if best is None or better(v, best):
                    best = v
            new.append(best)
        done = all(abs(a - b) <= tolerance * abs(a) for a, b in zip(new, x))
        x = new
        if done:
            converged = True
            break
    policy = []
    for k in range(n):
        qs = [_q_value(c, x) for c in q.choices[k]]
        best = 0
        for j in range(1, len(qs)):
            if better(qs[j], qs[best]):
                best = j
        policy.append(best)
    return x, policy, iterations, converged


def _lift_witness(m: Mdp, q: _Quotient, policy: Sequence[int], terminal) -> dict[int, int]:
    witness = {s: 0 for s in terminal}
    for k, states in enumerate(q.members):
        c = q.choices[k][policy[k]]
        kept = q.retained[k]
        if kept is None:
            witness[c.state] = c.action
            continue
        if c.state is None:
            for s in states:
                witness[s] = kept[s][0]
            continue
        route = attractor_policy(m, c.state, kept)
        for s in states:
            witness[s] = route.get(s, kept[s][0])
        witness[c.state] = c.action
    return witness


def total_reward(
    m: Mdp,
    rewards: RewardFunction,
    terminal: Iterable[int],
    direction: str = "max",
    mode: str = "exact",
    *,
    allow_stay: bool = True,
    tolerance: float = FLOAT_TOLERANCE,
    max_iterations: int = MAX_VI_ITERATIONS,
) -> SolveResult:
    """Optimal expected reward accumulated before reaching ``terminal``.

    Rewards may only sit on transitions entering a terminal state.  With
    ``allow_stay`` a policy may remain in an end component forever (reward
    zero); otherwise it must eventually leave every end component.
    """
    terminal = frozenset(terminal)
    _check_reward_contract(m, rewards, terminal)
    exact = mode != "float"
    q = _build_quotient(m, rewards, terminal, exact, allow_stay)
    converged = True
    if exact:
        x, policy, iterations = _policy_iteration(q, direction)
    else:
        x, policy, iterations, converged = _value_iteration(q, direction, tolerance, max_iterations)
    zero = Fraction(0) if exact else 0.0
    values = [zero] * m.num_states
    for s, k in q.node_of.items():
        values[s] = x[k]
    witness = _lift_witness(m, q, policy, terminal)
    return SolveResult(values, witness, iterations, "exact" if exact else "float", converged)


def acyclic_dp(
    m: Mdp,
    rewards: RewardFunction,
    terminal: Iterable[int],
    direction: str = "max",
    mode: str = "exact",
    *,
    allow_stay: bool = True,
    order: Sequence[int] | None = None,
) -> SolveResult:
    """Same as :func:`total_reward` for acyclic models, in one backward sweep."""
    terminal = frozenset(terminal)
    _check_reward_contract(m, rewards, terminal)
    if order is None:
        order = topological_order(m, [s for s in m.states() if s not in terminal])
        if order is None:
            raise ValueError("model is cyclic (ignoring self-loops)")
    exact = mode != "float"
    conv = (lambda v: v) if exact else float
    zero = Fraction(0) if exact else 0.0
    better = _better(direction)
    values = [zero] * m.num_states
    witness = {s: 0 for s in terminal}
    for s in order:
        if s in terminal:
            continue
        best = best_i = None
        for i, a in enumerate(m.actions[s]):
            loop = zero
            rest = zero
            for t, p in a.dist:
                p = conv(p)
                rv = rewards.get((s, i, t))
                if rv:
                    rest += p * conv(rv)
                if t == s:
                    loop += p
                elif t not in terminal:
                    rest += p * values[t]
            if loop == 1:
                if not allow_stay:
                    continue
                v = zero
            else:
                v = rest / (1 - loop)
            if best is None or better(v, best):
                best, best_i = v, i
        if best is None:
            raise SolverError(f"state {s} can only stay forever")
        values[s] = best
        witness[s] = best_i
    return SolveResult(values, witness, 1, "exact" if exact else "float")


def reach_prob(
    m: Mdp,
    target: Iterable[int],
    direction: str = "max",
    mode: str = "exact",
    *,
    method: str = "auto",
    tolerance: float = FLOAT_TOLERANCE,
) -> SolveResult:
    """Optimal probabilities ``Pr_s^dir(<>target)`` for every state ``s``.

    States with probability zero are found by graph analysis first; the
    rest is a total-reward problem paying 1 on entering the target.
    """
    target = frozenset(target)
    exact = mode != "float"
    one = Fraction(1) if exact else 1.0
    if direction == "max":
        zero_states = frozenset(m.states()) - reach_positive_max(m, target)
    else:
        zero_states = prob_zero_min(m, target)
    terminal = target | zero_states
    rewards = entry_rewards(m, {t: Fraction(1) for t in target}, skip=terminal)
    order = None
    if method in ("auto", "acyclic"):
        order = topological_order(m, [s for s in m.states() if s not in terminal])
        if order is None and method == "acyclic":
            raise ValueError("model is cyclic (ignoring self-loops)")
    if order is not None:
        res = acyclic_dp(m, rewards, terminal, direction, mode, order=order)
    else:
        res = total_reward(m, rewards, terminal, direction, mode, tolerance=tolerance)
    for t in target:
        res.values[t] = one
    if direction == "min":
        for s in zero_states:
            res.witness[s] = next(
                i for i, a in enumerate(m.actions[s]) if all(t in zero_states for t in a.support)
            )
    return res
