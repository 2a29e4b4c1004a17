"""Planner used as the imitation teacher, plus an exact oracle for tests.

Both solvers use the same finite-penalty Bellman operator: a state's value is
``min(D, min_a Q(s, a))`` where ``D`` is the dead-end penalty, syntactic dead
ends are worth exactly ``D`` and goal states ``0``.  Capping at ``D`` amounts
to an always-available "give up" option, which keeps every state's value
finite and makes LRTDP terminate even when dead ends are unavoidable.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .grounder import GroundTask
from .heuristics import INF, HeuristicCache
from .ssp import State, applicable, is_goal, successors

log = logging.getLogger(__name__)

DEFAULT_PENALTY = 500.0
DEFAULT_EPSILON = 1e-4
LABEL_TOLERANCE = 1e-6


@dataclass
class ValueTable:
    values: dict[State, float] = field(default_factory=dict)
    solved: set[State] = field(default_factory=set)
    penalty: float = DEFAULT_PENALTY
    epsilon: float = DEFAULT_EPSILON
    converged: bool = False

    def __getitem__(self, s: State) -> float:
        return self.values[s]

    def __contains__(self, s: State) -> bool:
        return s in self.values


class Teacher:
    """LRTDP over one ground task with a persistent value table.

    Repeated :meth:`solve` calls from different states share the table, so
    later calls reuse every state already labelled solved.
    """

    def __init__(self, task: GroundTask, heuristic: str = "lmcut",
                 epsilon: float = DEFAULT_EPSILON, penalty: float = DEFAULT_PENALTY,
                 trial_cap: int = 1000, seed: int = 0,
                 heuristics: HeuristicCache | None = None):
        self.task = task
        self.heuristic = heuristic
        self.trial_cap = trial_cap
        self.heur = heuristics or HeuristicCache(task)
        self.vt = ValueTable(penalty=float(penalty), epsilon=float(epsilon))
        self.rng = np.random.default_rng(seed)
        self._succ: dict[State, list[tuple[int, float, list[tuple[float, State]]]]] = {}

    # -- basic quantities -------------------------------------------------

    @property
    def penalty(self) -> float:
        return self.vt.penalty

    def expand(self, s: State):
        """``[(action, cost, [(prob, succ), ...]), ...]`` over applicable actions."""
        hit = self._succ.get(s)
        if hit is None:
            task = self.task
            hit = [(a, task.actions[a].cost, successors(task, s, a)) for a in applicable(task, s)]
            self._succ[s] = hit
        return hit

    def value(self, s: State) -> float:
        v = self.vt.values.get(s)
        if v is not None:
            return v
        if is_goal(self.task, s):
            v = 0.0
            self.vt.solved.add(s)
        elif not self.expand(s):
            v = self.penalty
            self.vt.solved.add(s)
        else:
            h = self.heur.value(self.heuristic, s)
            if h == INF or h >= self.penalty:
                v = self.penalty
                if h == INF:
                    self.vt.solved.add(s)
            else:
                v = h
        self.vt.values[s] = v
        return v

    def q_values(self, s: State) -> list[tuple[int, float]]:
        return [(a, c + sum(p * self.value(t) for p, t in succ))
                for a, c, succ in self.expand(s)]

    def greedy(self, s: State) -> tuple[int, float]:
        """Greedy action (lowest index on ties) and its Q-value; ``(-1, D)`` if none."""
        best_a, best_q = -1, INF
        for a, q in self.q_values(s):
            if q < best_q:
                best_a, best_q = a, q
        if best_a < 0:
            return -1, self.penalty
        return best_a, best_q

    def is_terminal(self, s: State) -> bool:
        return is_goal(self.task, s) or not self.expand(s)

    def backup(self, s: State) -> int:
        a, q = self.greedy(s)
        if a >= 0:
            self.vt.values[s] = min(self.penalty, q)
        return a

    def residual(self, s: State) -> float:
        if self.is_terminal(s):
            return 0.0
        _, q = self.greedy(s)
        return abs(self.value(s) - min(self.penalty, q))

    # -- LRTDP --------------------------------------------------------------

    def solve(self, s: State, max_trials: int | None = None,
              time_budget: float | None = None) -> bool:
        """Run LRTDP trials from ``s`` until it is labelled solved.

        Returns whether ``s`` was solved within the trial/time budget.
        """
        start = time.monotonic()
        trials = 0
        self.value(s)
        while s not in self.vt.solved:
            if max_trials is not None and trials >= max_trials:
                break
            if time_budget is not None and time.monotonic() - start > time_budget:
                break
            self._trial(s)
            trials += 1
        done = s in self.vt.solved
        if s == self.task.init:
            self.vt.converged = done
        return done

    def _sample(self, succ: list[tuple[float, State]]) -> State:
        if len(succ) == 1:
            return succ[0][1]
        u = self.rng.random()
        acc = 0.0
        for p, t in succ:
            acc += p
            if u < acc:
                return t
        return succ[-1][1]

    def _trial(self, s: State) -> None:
        visited = []
        solved = self.vt.solved
        while s not in solved:
            visited.append(s)
            if self.is_terminal(s) or len(visited) > self.trial_cap:
                break
            a = self.backup(s)
            if self.vt.values[s] >= self.penalty:
                break
            succ = next(x for x in self.expand(s) if x[0] == a)[2]
            s = self._sample(succ)
        while visited:
            if not self._check_solved(visited.pop()):
                break

    def _check_solved(self, s: State) -> bool:
        solved = self.vt.solved
        rv = True
        open_, closed = [], []
        seen = set()
        if s not in solved:
            open_.append(s)
            seen.add(s)
        while open_:
            s = open_.pop()
            closed.append(s)
            if self.is_terminal(s):
                continue
            a, q = self.greedy(s)
            if abs(self.value(s) - min(self.penalty, q)) > self.vt.epsilon:
                rv = False
                continue
            if q >= self.penalty:
                continue
            for _, t in next(x for x in self.expand(s) if x[0] == a)[2]:
                if t not in solved and t not in seen:
                    seen.add(t)
                    open_.append(t)
        if rv:
            solved.update(closed)
        else:
            while closed:
                self.backup(closed.pop())
        return rv

    # -- supervision ---------------------------------------------------------

    def envelope(self, s: State) -> list[State]:
        """States visited with positive probability by the greedy policy from ``s``."""
        seen = {s}
        order = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if self.is_terminal(u):
                continue
            a, q = self.greedy(u)
            if q >= self.penalty:
                continue
            for p, t in next(x for x in self.expand(u) if x[0] == a)[2]:
                if p > 0 and t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
        return order

    def labels(self, s: State, refine: bool = True, max_rounds: int = 20) -> np.ndarray:
        """0/1 vector over all actions marking the Q-minimal enabled ones.

        With ``refine`` every action that currently ties with the best one has
        its successors solved first, so that heuristic under-estimates on
        unexplored branches cannot produce spurious ties.
        """
        refined: set[int] = set()
        for _ in range(max_rounds if refine else 1):
            qs = self.q_values(s)
            best = min(q for _, q in qs)
            ties = [a for a, q in qs if q <= best + LABEL_TOLERANCE]
            todo = [a for a in ties if a not in refined]
            if not refine or not todo or best >= self.penalty:
                break
            for a in todo:
                refined.add(a)
                for _, t in next(x for x in self.expand(s) if x[0] == a)[2]:
                    self.solve(t, max_trials=10_000)
        return q_labels_from(self.task, self.q_values(s))


def q_labels_from(task: GroundTask, qs: list[tuple[int, float]]) -> np.ndarray:
    y = np.zeros(task.n_actions, dtype=np.float64)
    if not qs:
        return y
    best = min(q for _, q in qs)
    for a, q in qs:
        if q <= best + LABEL_TOLERANCE:
            y[a] = 1.0
    return y


def q_labels(task: GroundTask, vt: ValueTable, s: State) -> np.ndarray:
    """Labels from a fixed value table (missing successors count as 0)."""
    qs = []
    for a in applicable(task, s):
        qs.append((a, task.actions[a].cost
                   + sum(p * vt.values.get(t, 0.0) for p, t in successors(task, s, a))))
    return q_labels_from(task, qs)


def lrtdp_solve(task: GroundTask, s: State | None = None, heuristic: str = "lmcut",
                epsilon: float = DEFAULT_EPSILON, penalty: float = DEFAULT_PENALTY,
                trial_cap: int = 1000, max_trials: int | None = None,
                time_budget: float | None = None, seed: int = 0) -> ValueTable:
    teacher = Teacher(task, heuristic, epsilon, penalty, trial_cap, seed)
    start = task.init if s is None else s
    teacher.vt.converged = teacher.solve(start, max_trials, time_budget)
    return teacher.vt


# ---------------------------------------------------------------------------
# exact oracle


def reachable_states(task: GroundTask, start: State | None = None,
                     cap: int = 100_000) -> list[State]:
    s0 = task.init if start is None else start
    seen = {s0}
    order = [s0]
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        if is_goal(task, s):
            continue
        for a in applicable(task, s):
            for _, t in successors(task, s, a):
                if t not in seen:
                    if len(seen) >= cap:
                        raise CapacityError(f"more than {cap} reachable states")
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
    return order


def value_iteration(task: GroundTask, penalty: float = DEFAULT_PENALTY,
                    tol: float = 1e-9, cap: int = 100_000,
                    start: State | None = None, max_sweeps: int = 100_000) -> ValueTable:
    """Gauss-Seidel value iteration over the reachable state space."""
    states = reachable_states(task, start, cap)
    index = {s: i for i, s in enumerate(states)}
    V = np.zeros(len(states))
    model = []
    for i, s in enumerate(states):
        if is_goal(task, s):
            model.append(None)
            continue
        acts = applicable(task, s)
        if not acts:
            V[i] = penalty
            model.append(None)
            continue
        model.append([(task.actions[a].cost, [(p, index[t]) for p, t in successors(task, s, a)])
                      for a in acts])
    for _ in range(max_sweeps):
        delta = 0.0
        for i, m in enumerate(model):
            if m is None:
                continue
            best = penalty
            for c, succ in m:
                q = c
                for p, j in succ:
                    q += p * V[j]
                if q < best:
                    best = q
            d = abs(best - V[i])
            if d > delta:
                delta = d
            V[i] = best
        if delta < tol:
            break
    vt = ValueTable({s: float(V[i]) for i, s in enumerate(states)}, set(states),
                    penalty=penalty, epsilon=tol, converged=True)
    return vt


def greedy_from_table(task: GroundTask, vt: ValueTable, s: State) -> int:
    best_a, best_q = -1, INF
    for a in applicable(task, s):
        q = task.actions[a].cost + sum(p * vt.values[t] for p, t in successors(task, s, a))
        if q < best_q:
            best_a, best_q = a, q
    return best_a
