"""Greedy policy evaluation with coverage and cost statistics."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import ProblemNet
from .grounder import GroundTask
from .model import Weights
from .ssp import DEFAULT_STEP_LIMIT, Outcome, State, Trajectory, child_rng, run_policy


@dataclass
class EvalReport:
    problem: str
    trials: int
    coverage: int
    mean_cost: float | None
    ci95: float | None
    outcomes: list[str] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    seed: int = 0

    def line(self) -> str:
        def fmt(v):
            return "nan" if v is None else f"{v:.4f}"
        return "\t".join([self.problem, f"{self.coverage}/{self.trials}",
                          fmt(self.mean_cost), fmt(self.ci95), str(self.seed)])

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def summarize(problem: str, trajs: list[Trajectory], seed: int) -> EvalReport:
    good = [t.total_cost for t in trajs if t.outcome is Outcome.GOAL]
    mean = float(np.mean(good)) if good else None
    ci = None
    if len(good) >= 2:
        ci = 1.96 * float(np.std(good, ddof=1)) / math.sqrt(len(good))
    return EvalReport(problem, len(trajs), len(good), mean, ci,
                      [t.outcome.value for t in trajs], [t.total_cost for t in trajs], seed)


class GreedyPolicy:
    """Argmax of the network's action distribution, memoised per state."""

    def __init__(self, pnet: ProblemNet):
        self.pnet = pnet
        self._memo: dict[State, int] = {}

    def __call__(self, s: State) -> int:
        a = self._memo.get(s)
        if a is None:
            a = self._memo[s] = self.pnet.greedy(s)
        return a


def evaluate(weights: Weights, task: GroundTask, trials: int = 30, seed: int = 0,
             landmarks: bool = True, limit: int = DEFAULT_STEP_LIMIT,
             trace=None) -> EvalReport:
    """Run ``trials`` greedy executions; trial ``k`` uses the stream ``(seed, k)``."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    policy = GreedyPolicy(ProblemNet(task, weights, landmarks))
    trajs = []
    for k in range(trials):
        traj = run_policy(task, policy, child_rng(seed, "eval", k), limit=limit)
        if trace is not None:
            for line in traj.trace_lines(task):
                trace(f"{k}\t{line}")
        trajs.append(traj)
    return summarize(task.name, trajs, seed)
