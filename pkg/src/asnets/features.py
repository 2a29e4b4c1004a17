"""Per-state network inputs: truth bits, landmark flags and the enabled mask."""

from __future__ import annotations

import numpy as np

from .grounder import GroundTask, NetworkSpec, build_network_spec
from .heuristics import HeuristicCache
from .model import ASNet, Inputs, Weights
from .ssp import State, applicable_mask


class Featurizer:
    """Builds :class:`Inputs` rows for states of one task, with a per-state memo.

    With ``landmarks=False`` the three flag columns are all zero; input
    dimensions stay the same so weights remain interchangeable.
    """

    def __init__(self, task: GroundTask, landmarks: bool = True,
                 heuristics: HeuristicCache | None = None, memo_limit: int = 100_000):
        self.task = task
        self.landmarks = landmarks
        self.heur = heuristics or HeuristicCache(task)
        self.memo_limit = memo_limit
        self._memo: dict[State, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def row(self, s: State) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        hit = self._memo.get(s)
        if hit is None:
            bits = self.task.state_bits(s).astype(np.float64)
            if self.landmarks:
                flags = self.heur.flags(s)
            else:
                flags = np.zeros((self.task.n_actions, 3))
            hit = (bits, flags, applicable_mask(self.task, s))
            if len(self._memo) < self.memo_limit:
                self._memo[s] = hit
        return hit

    def inputs(self, states: list[State]) -> Inputs:
        rows = [self.row(s) for s in states]
        if not rows:
            A, P = self.task.n_actions, self.task.n_props
            return Inputs(np.zeros((0, P)), np.zeros((0, A, 3)), np.zeros((0, A), dtype=bool))
        return Inputs(np.stack([r[0] for r in rows]), np.stack([r[1] for r in rows]),
                      np.stack([r[2] for r in rows]))


class ProblemNet:
    """Everything needed to run the shared weights on one ground task."""

    def __init__(self, task: GroundTask, weights: Weights, landmarks: bool = True,
                 heuristics: HeuristicCache | None = None):
        self.task = task
        self.spec: NetworkSpec = build_network_spec(task, weights.n_layers, weights.hidden_size)
        self.net = ASNet(self.spec, weights)
        self.feats = Featurizer(task, landmarks, heuristics)

    @property
    def weights(self) -> Weights:
        return self.net.weights

    @weights.setter
    def weights(self, w: Weights) -> None:
        self.net.weights = w

    def probs(self, s: State) -> np.ndarray:
        return self.net.forward(self.feats.inputs([s]))[0]

    def greedy(self, s: State) -> int:
        """Most probable action; ``argmax`` breaks ties toward the lowest index."""
        return int(np.argmax(self.probs(s)))
