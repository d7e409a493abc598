"""Qualitative graph analyses on MDPs.

Everything here ignores probability values and only looks at supports.
State sets are plain ``frozenset`` objects of state indices.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from typing import Iterable, Mapping

import networkx as nx

from .model import Mdp

__all__ = [
    "MecPartition",
    "reach_positive_max",
    "prob_zero_min",
    "prob_one_max",
    "maximal_end_components",
    "topological_order",
    "is_acyclic",
    "bfs_distance",
    "closed_reach",
    "attractor_policy",
]


def reach_positive_max(m: Mdp, target: Iterable[int]) -> frozenset[int]:
    """States from which some policy reaches ``target`` with positive probability."""
    pred = m.predecessors()
    seen = set(target)
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for s in pred[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return frozenset(seen)


def _forced_positive(m: Mdp, target: Iterable[int]) -> set[int]:
    # states where every policy reaches target with positive probability
    inside = set(target)
    hits = {}  # (s, a) -> whether some successor is inside
    missing = [len(acts) for acts in m.actions]
    users: list[list[tuple[int, int]]] = [[] for _ in m.actions]
    for s, acts in enumerate(m.actions):
        for i, a in enumerate(acts):
            for t, _ in a.dist:
                users[t].append((s, i))
    queue = deque(inside)
    while queue:
        t = queue.popleft()
        for s, i in users[t]:
            if s in inside or (s, i) in hits:
                continue
            hits[(s, i)] = True
            missing[s] -= 1
            if missing[s] == 0:
                inside.add(s)
                queue.append(s)
    return inside


def prob_zero_min(m: Mdp, target: Iterable[int]) -> frozenset[int]:
    """States with a policy that never reaches ``target``."""
    return frozenset(set(m.states()) - _forced_positive(m, target))


def prob_one_max(m: Mdp, target: Iterable[int]) -> frozenset[int]:
    """States from which some policy reaches ``target`` almost surely."""
    target = frozenset(target)
    candidates = set(m.states())
    while True:
        reach = set(target)
        changed = True
        while changed:
            changed = False
            for s in candidates - reach:
                for a in m.actions[s]:
                    sup = a.support
                    if all(t in candidates for t in sup) and any(t in reach for t in sup):
                        reach.add(s)
                        changed = True
                        break
        if reach == candidates:
            return frozenset(reach)
        candidates = reach


@dataclass(frozen=True)
class MecPartition:
    """Maximal end components.

    ``blocks[k]`` is ``(states, retained)`` where ``retained`` maps each
    member state to the action indices whose support stays in the block.
    """

    blocks: tuple[tuple[frozenset[int], Mapping[int, tuple[int, ...]]], ...]
    block_of: Mapping[int, int]

    def __len__(self) -> int:
        return len(self.blocks)


def maximal_end_components(
    m: Mdp,
    states: Iterable[int] | None = None,
    allowed: Mapping[int, Iterable[int]] | None = None,
) -> MecPartition:
    """MEC decomposition of the sub-MDP on ``states``.

    Only actions whose support lies inside ``states`` (and, if given, listed
    in ``allowed``) are considered.
    """
    region = set(m.states()) if states is None else set(states)
    avail: dict[int, set[int]] = {}
    for s in region:
        idx = range(len(m.actions[s])) if allowed is None else allowed.get(s, ())
        avail[s] = {i for i in idx if all(t in region for t in m.actions[s][i].support)}

    users: dict[int, list[tuple[int, int]]] = {}
    for s in region:
        for i in avail[s]:
            for t in m.actions[s][i].support:
                users.setdefault(t, []).append((s, i))

    while True:
        # drop states without actions, and actions that may lead to them
        queue = deque(s for s in region if not avail[s])
        while queue:
            s = queue.popleft()
            if s not in region:
                continue
            region.discard(s)
            for u, i in users.get(s, ()):
                if u in region and i in avail[u]:
                    avail[u].discard(i)
                    if not avail[u]:
                        queue.append(u)
        g = nx.DiGraph()
        g.add_nodes_from(region)
        for s in region:
            for i in avail[s]:
                for t in m.actions[s][i].support:
                    g.add_edge(s, t)
        comp = {}
        for k, scc in enumerate(nx.strongly_connected_components(g)):
            for s in scc:
                comp[s] = k
        changed = False
        for s in region:
            keep = {i for i in avail[s] if all(comp[t] == comp[s] for t in m.actions[s][i].support)}
            if keep != avail[s]:
                avail[s] = keep
                changed = True
        if not changed:
            break

    groups: dict[int, set[int]] = {}
    for s in region:
        groups.setdefault(comp[s], set()).add(s)
    blocks = []
    for members in sorted(groups.values(), key=min):
        blocks.append((frozenset(members), {s: tuple(sorted(avail[s])) for s in sorted(members)}))
    block_of = {s: k for k, (members, _) in enumerate(blocks) for s in members}
    return MecPartition(tuple(blocks), block_of)


def topological_order(m: Mdp, states: Iterable[int] | None = None) -> list[int] | None:
    """Order in which every successor precedes its predecessors.

    Self-loops are ignored.  Returns ``None`` if another cycle exists.
    """
    region = set(m.states()) if states is None else set(states)
    sorter = TopologicalSorter()
    for s in sorted(region):
        sorter.add(s, *sorted(t for t in m.successors(s) if t != s and t in region))
    try:
        return list(sorter.static_order())
    except CycleError:
        return None


def is_acyclic(m: Mdp) -> bool:
    return topological_order(m) is not None


def bfs_distance(m: Mdp, source: int) -> dict[int, int]:
    """Hop distances from ``source``; unreachable states are absent."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        s = queue.popleft()
        for t in sorted(m.successors(s)):
            if t not in dist:
                dist[t] = dist[s] + 1
                queue.append(t)
    return dist


def closed_reach(m: Mdp, source: int, region: frozenset[int]) -> frozenset[int]:
    """States reachable from ``source`` within ``region`` using only actions
    whose whole support stays in ``region``."""
    if source not in region:
        return frozenset()
    seen = {source}
    queue = deque([source])
    while queue:
        s = queue.popleft()
        for a in m.actions[s]:
            if all(t in region for t in a.support):
                for t in a.support:
                    if t not in seen:
                        seen.add(t)
                        queue.append(t)
    return frozenset(seen)


def attractor_policy(
    m: Mdp,
    goal: int | Iterable[int],
    usable: Mapping[int, Iterable[int]],
) -> dict[int, int]:
    """Memoryless choices steering towards ``goal`` with positive probability.

    ``usable[s]`` lists the action indices allowed in ``s``.  Returns a map
    for every state (other than the goal) that can reach the goal using
    usable actions; the chosen action always moves one layer closer with
    positive probability.
    """
    goals = {goal} if isinstance(goal, int) else set(goal)
    region = set(usable) | goals
    pred: dict[int, list[tuple[int, int]]] = {}
    for s in usable:
        for i in usable[s]:
            for t in m.actions[s][i].support:
                pred.setdefault(t, []).append((s, i))
    choice: dict[int, int] = {}
    done = set(goals)
    frontier = sorted(goals)
    while frontier:
        nxt = []
        for t in frontier:
            for s, i in sorted(pred.get(t, ())):
                if s in done or s not in region:
                    continue
                if s in choice:
                    choice[s] = min(choice[s], i)
                else:
                    choice[s] = i
                    nxt.append(s)
        done.update(nxt)
        frontier = sorted(nxt)
    return choice
