"""Factored SSP semantics over a :class:`GroundTask`.

States are plain Python ints used as bitsets over the task's propositions
(bit ``p`` set iff proposition ``p`` is true), so they hash and compare
cheaply and successor computation is two mask operations.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import NotApplicable, PolicyError
from .grounder import GroundTask

State = int

DEFAULT_STEP_LIMIT = 300


class Outcome(str, enum.Enum):
    GOAL = "goal"
    DEAD_END = "dead-end"
    LENGTH_LIMIT = "length-limit"


@dataclass
class Trajectory:
    states: list[State]
    actions: list[int] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    outcome: Outcome = Outcome.LENGTH_LIMIT

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs))

    def trace_lines(self, task: GroundTask) -> list[str]:
        """One ``state-hash action cost`` line per step."""
        return [f"{state_hash(s)} {task.action_name(a)} {c:g}"
                for s, a, c in zip(self.states, self.actions, self.costs)]


def state_hash(s: State) -> str:
    return hashlib.sha1(s.to_bytes((s.bit_length() + 7) // 8 or 1, "little")).hexdigest()[:12]


def applicable(task: GroundTask, s: State) -> tuple[int, ...]:
    cache = task._applicable_cache
    hit = cache.get(s)
    if hit is None:
        hit = tuple(a for a, m in enumerate(task.pre_masks) if m & s == m)
        if len(cache) < 200_000:
            cache[s] = hit
    return hit


def applicable_mask(task: GroundTask, s: State) -> np.ndarray:
    mask = np.zeros(task.n_actions, dtype=bool)
    mask[list(applicable(task, s))] = True
    return mask


def is_applicable(task: GroundTask, s: State, a: int) -> bool:
    m = task.pre_masks[a]
    return m & s == m


def is_goal(task: GroundTask, s: State) -> bool:
    return task.goal_mask & s == task.goal_mask


def is_dead_end(task: GroundTask, s: State) -> bool:
    """Syntactic dead end: not a goal and nothing is applicable."""
    return not is_goal(task, s) and not applicable(task, s)


def is_terminal(task: GroundTask, s: State) -> bool:
    return is_goal(task, s) or not applicable(task, s)


def successors(task: GroundTask, s: State, a: int) -> list[tuple[float, State]]:
    """Distinct successor states with merged probabilities, in outcome order."""
    if not is_applicable(task, s, a):
        raise NotApplicable(f"{task.action_name(a)} is not applicable")
    merged: dict[State, float] = {}
    for p, add, keep in task.outcome_masks[a]:
        nxt = (s & keep) | add
        merged[nxt] = merged.get(nxt, 0.0) + p
    return [(p, t) for t, p in merged.items()]


def exact_successors(task: GroundTask, s: State, a: int) -> list[tuple[Fraction, State]]:
    """Same as :func:`successors` with rational probabilities."""
    if not is_applicable(task, s, a):
        raise NotApplicable(f"{task.action_name(a)} is not applicable")
    merged: dict[State, Fraction] = {}
    for o in task.actions[a].outcomes:
        nxt = s
        for d in o.delete:
            nxt &= ~(1 << d)
        for ad in o.add:
            nxt |= 1 << ad
        merged[nxt] = merged.get(nxt, Fraction(0)) + o.probability
    return [(p, t) for t, p in merged.items()]


def sample_transition(task: GroundTask, s: State, a: int,
                      rng: np.random.Generator) -> tuple[State, float]:
    succ = successors(task, s, a)
    if len(succ) == 1:
        return succ[0][1], task.actions[a].cost
    u = rng.random()
    acc = 0.0
    for p, t in succ:
        acc += p
        if u < acc:
            return t, task.actions[a].cost
    return succ[-1][1], task.actions[a].cost


def run_policy(task: GroundTask, policy: Callable[[State], int], rng: np.random.Generator,
               limit: int = DEFAULT_STEP_LIMIT, start: State | None = None) -> Trajectory:
    """Execute ``policy`` until a goal, a dead end, or ``limit`` actions."""
    s = task.init if start is None else start
    traj = Trajectory(states=[s])
    while True:
        if is_goal(task, s):
            traj.outcome = Outcome.GOAL
            return traj
        if not applicable(task, s):
            traj.outcome = Outcome.DEAD_END
            return traj
        if len(traj.actions) >= limit:
            traj.outcome = Outcome.LENGTH_LIMIT
            return traj
        a = policy(s)
        if not is_applicable(task, s, a):
            raise PolicyError(f"policy chose inapplicable action {task.action_name(a)}")
        s, cost = sample_transition(task, s, a, rng)
        traj.actions.append(a)
        traj.costs.append(cost)
        traj.states.append(s)


def child_rng(seed: int, *key) -> np.random.Generator:
    """Independent stream for ``(seed, *key)``; keys may be ints or strings."""
    words = [seed]
    for k in key:
        if isinstance(k, str):
            words.append(int.from_bytes(hashlib.sha1(k.encode()).digest()[:4], "little"))
        else:
            words.append(int(k))
    return np.random.default_rng(np.random.SeedSequence(words))
