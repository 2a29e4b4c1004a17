"""Delete-relaxation heuristics on the all-outcomes determinisation.

Every (ground action, outcome) pair becomes a deterministic relaxed operator
without deletes.  On top of that: h^max, h^add, and LM-cut with its
disjunctive action landmarks, which the network consumes as per-action flags.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .grounder import GroundTask

INF = math.inf
_ZERO = 1e-9


@dataclass
class RelaxedTask:
    """Delete-free operators over ``n_props + 2`` facts.

    Fact ``n_props`` is the artificial goal fact reached by the zero-cost goal
    operator (the last operator); fact ``n_props + 1`` is an always-true fact
    used as the precondition of operators that otherwise have none.
    """
    n_props: int
    pre: list[tuple[int, ...]]
    add: list[tuple[int, ...]]
    cost: list[float]
    origin: list[int]
    goal: tuple[int, ...]
    consumers: list[list[int]] = field(repr=False)
    achievers: list[list[int]] = field(repr=False)

    @property
    def goal_fact(self) -> int:
        return self.n_props

    @property
    def true_fact(self) -> int:
        return self.n_props + 1

    @property
    def goal_op(self) -> int:
        return len(self.pre) - 1

    @property
    def n_ops(self) -> int:
        """Operators excluding the artificial goal operator."""
        return len(self.pre) - 1


@dataclass
class LandmarkSet:
    landmarks: list[frozenset[int]]
    hvalue: float
    unreachable: bool = False


def determinize_relax(task: GroundTask) -> RelaxedTask:
    n = task.n_props
    pre, add, cost, origin = [], [], [], []
    for a, act in enumerate(task.actions):
        p = tuple(sorted(set(act.pre))) or (n + 1,)
        for o in act.outcomes:
            pre.append(p)
            add.append(tuple(sorted(set(o.add))))
            cost.append(float(act.cost))
            origin.append(a)
    goal = tuple(sorted(set(task.goal)))
    pre.append(goal or (n + 1,))
    add.append((n,))
    cost.append(0.0)
    origin.append(-1)

    consumers: list[list[int]] = [[] for _ in range(n + 2)]
    achievers: list[list[int]] = [[] for _ in range(n + 2)]
    for o, (ps, ads) in enumerate(zip(pre, add)):
        for q in ps:
            consumers[q].append(o)
        for q in ads:
            achievers[q].append(o)
    return RelaxedTask(n, pre, add, cost, origin, goal, consumers, achievers)


def _facts(relaxed: RelaxedTask, s: int) -> list[int]:
    out = [relaxed.true_fact]
    while s:
        low = s & -s
        out.append(low.bit_length() - 1)
        s ^= low
    return out


def _propagate(relaxed: RelaxedTask, s: int, costs: list[float], additive: bool):
    """Generalised Dijkstra; returns (fact values, operator values)."""
    nf = relaxed.n_props + 2
    dist = [INF] * nf
    op_val = [INF] * len(relaxed.pre)
    remaining = [len(p) for p in relaxed.pre]
    acc = [0.0] * len(relaxed.pre)
    heap = []
    for q in _facts(relaxed, s):
        if dist[q] != 0.0:
            dist[q] = 0.0
            heap.append((0.0, q))
    heapq.heapify(heap)
    consumers, adds = relaxed.consumers, relaxed.add
    done = [False] * nf
    while heap:
        d, q = heapq.heappop(heap)
        if done[q]:
            continue
        done[q] = True
        for o in consumers[q]:
            remaining[o] -= 1
            if additive:
                acc[o] += d
            if remaining[o] == 0:
                v = (acc[o] if additive else d) + costs[o]
                op_val[o] = v
                for r in adds[o]:
                    if v < dist[r]:
                        dist[r] = v
                        heapq.heappush(heap, (v, r))
    return dist, op_val


def hmax(relaxed: RelaxedTask, s: int) -> float:
    dist, _ = _propagate(relaxed, s, relaxed.cost, additive=False)
    return dist[relaxed.goal_fact]


def hadd(relaxed: RelaxedTask, s: int) -> float:
    """Additive heuristic: sum of per-goal-fact additive costs, ``inf`` if unreachable."""
    dist, _ = _propagate(relaxed, s, relaxed.cost, additive=True)
    total = 0.0
    for g in relaxed.goal:
        if dist[g] == INF:
            return INF
        total += dist[g]
    return total


def lmcut(relaxed: RelaxedTask, s: int) -> LandmarkSet:
    """LM-cut value and the disjunctive action landmarks found on the way."""
    costs = list(relaxed.cost)
    goal_fact = relaxed.goal_fact
    pre, add, achievers = relaxed.pre, relaxed.add, relaxed.achievers
    n_ops = len(pre)
    landmarks: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()
    h = 0.0
    init_facts = _facts(relaxed, s)
    while True:
        dist, op_val = _propagate(relaxed, s, costs, additive=False)
        if dist[goal_fact] == INF:
            return LandmarkSet([], INF, unreachable=True)
        if dist[goal_fact] <= _ZERO:
            break
        # h^max supporter: a maximising precondition, lowest index on ties
        supp = [-1] * n_ops
        by_supp: dict[int, list[int]] = {}
        for o in range(n_ops):
            if op_val[o] == INF:
                continue
            best, bq = -1.0, -1
            for q in pre[o]:
                if dist[q] > best:
                    best, bq = dist[q], q
            supp[o] = bq
            by_supp.setdefault(bq, []).append(o)
        # goal zone: facts reaching the goal through zero-cost operators
        zone = {goal_fact}
        stack = [goal_fact]
        while stack:
            q = stack.pop()
            for o in achievers[q]:
                if supp[o] >= 0 and costs[o] <= _ZERO:
                    r = supp[o]
                    if r not in zone:
                        zone.add(r)
                        stack.append(r)
        # facts reachable from the state without entering the goal zone
        reached = set()
        stack = [q for q in init_facts if q not in zone]
        reached.update(stack)
        cut: list[int] = []
        in_cut = set()
        while stack:
            q = stack.pop()
            for o in by_supp.get(q, ()):
                hits_zone = False
                for r in add[o]:
                    if r in zone:
                        hits_zone = True
                    elif r not in reached:
                        reached.add(r)
                        stack.append(r)
                if hits_zone and o not in in_cut:
                    in_cut.add(o)
                    cut.append(o)
        m = min(costs[o] for o in cut)
        h += m
        for o in cut:
            costs[o] -= m
        lm = frozenset(relaxed.origin[o] for o in cut)
        if lm not in seen:
            seen.add(lm)
            landmarks.append(lm)
    return LandmarkSet(landmarks, h)


def landmark_flags(lms: LandmarkSet, a: int) -> tuple[int, int, int]:
    sole = any(len(lm) == 1 and a in lm for lm in lms.landmarks)
    shared = any(len(lm) >= 2 and a in lm for lm in lms.landmarks)
    return int(sole), int(shared), int(not (sole or shared))


def landmark_flag_matrix(lms: LandmarkSet, n_actions: int) -> np.ndarray:
    """``(n_actions, 3)`` array of flags for every action at once."""
    flags = np.zeros((n_actions, 3), dtype=np.float64)
    for lm in lms.landmarks:
        col = 0 if len(lm) == 1 else 1
        flags[list(lm), col] = 1.0
    flags[:, 2] = (flags[:, 0] + flags[:, 1] == 0)
    return flags


class HeuristicCache:
    """Per-task memo of relaxed-task heuristics keyed by state."""

    def __init__(self, task: GroundTask, limit: int = 200_000):
        self.task = task
        self.relaxed = determinize_relax(task)
        self.limit = limit
        self._lm: dict[int, LandmarkSet] = {}
        self._hadd: dict[int, float] = {}

    def lmcut(self, s: int) -> LandmarkSet:
        hit = self._lm.get(s)
        if hit is None:
            hit = lmcut(self.relaxed, s)
            if len(self._lm) < self.limit:
                self._lm[s] = hit
        return hit

    def hadd(self, s: int) -> float:
        hit = self._hadd.get(s)
        if hit is None:
            hit = hadd(self.relaxed, s)
            if len(self._hadd) < self.limit:
                self._hadd[s] = hit
        return hit

    def value(self, which: str, s: int) -> float:
        if which == "lmcut":
            return self.lmcut(s).hvalue
        if which == "hadd":
            return self.hadd(s)
        if which == "zero":
            return 0.0
        raise ValueError(f"unknown heuristic {which!r}")

    def flags(self, s: int) -> np.ndarray:
        return landmark_flag_matrix(self.lmcut(s), self.task.n_actions)


def brute_force_relaxed_cost(relaxed: RelaxedTask, s: int) -> float:
    """Optimal delete-relaxed plan cost by uniform-cost search over fact sets.

    Exponential; only meant as a test oracle on small tasks.
    """
    goal_mask = 0
    for g in relaxed.goal:
        goal_mask |= 1 << g
    start = s | (1 << relaxed.true_fact)
    pre_masks = []
    add_masks = []
    for o in range(relaxed.n_ops):
        pm = 0
        for q in relaxed.pre[o]:
            pm |= 1 << q
        am = 0
        for q in relaxed.add[o]:
            am |= 1 << q
        pre_masks.append(pm)
        add_masks.append(am)
    best = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, f = heapq.heappop(heap)
        if d > best.get(f, INF):
            continue
        if f & goal_mask == goal_mask:
            return d
        for o in range(relaxed.n_ops):
            if pre_masks[o] & f == pre_masks[o] and add_masks[o] & ~f:
                g = f | add_masks[o]
                nd = d + relaxed.cost[o]
                if nd < best.get(g, INF):
                    best[g] = nd
                    heapq.heappush(heap, (nd, g))
    return INF
