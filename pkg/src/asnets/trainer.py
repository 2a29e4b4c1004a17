"""Imitation training: alternate policy exploration with supervised minibatch updates."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyMemory, TeacherBudgetExhausted
from .features import ProblemNet
from .grounder import GroundTask
from .heuristics import HeuristicCache
from .model import Adam, Inputs, Weights, add_grads, init_weights
from .ppddl import Domain
from .ssp import State, child_rng, is_goal, is_terminal, sample_transition
from .teacher import DEFAULT_EPSILON, DEFAULT_PENALTY, Teacher

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    explore_total: int = 25
    train_batches: int = 300
    batch_size: int = 128
    step_limit: int = 300
    time_limit: float = 7200.0
    max_epochs: int | None = None
    plateau_window: int = 10
    plateau_threshold: float = 0.01
    epsilon: float = DEFAULT_EPSILON
    penalty: float = DEFAULT_PENALTY
    heuristic: str = "lmcut"
    landmarks: bool = True
    n_layers: int = 2
    hidden_size: int = 16
    lr: float = 5e-4
    l2: float = 1e-3
    dropout: float = 0.25
    teacher_state_budget: float | None = 60.0
    teacher_epoch_budget: float | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("explore_total", "train_batches", "batch_size", "step_limit",
                     "plateau_window", "hidden_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_layers < 0 or self.time_limit < 0:
            raise ValueError("n_layers and time_limit must be non-negative")
        if self.heuristic not in ("lmcut", "hadd"):
            raise ValueError(f"unknown teacher heuristic {self.heuristic!r}")

    def explore_per_problem(self, n_problems: int) -> int:
        return math.ceil(self.explore_total / n_problems)


class StateMemory:
    """Labelled states of one problem; insertion is idempotent and labels are frozen."""

    def __init__(self, pnet: ProblemNet):
        self.pnet = pnet
        self.states: list[State] = []
        self.labels: list[np.ndarray] = []
        self._index: dict[State, int] = {}
        self._inputs: Inputs | None = None
        self._y: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, s: State) -> bool:
        return s in self._index

    def add(self, s: State, y: np.ndarray) -> bool:
        if s in self._index or is_terminal(self.pnet.task, s):
            return False
        self._index[s] = len(self.states)
        self.states.append(s)
        self.labels.append(y)
        self._inputs = None
        return True

    def arrays(self) -> tuple[Inputs, np.ndarray]:
        if self._inputs is None:
            self._inputs = self.pnet.feats.inputs(self.states)
            self._y = np.stack(self.labels)
        return self._inputs, self._y


@dataclass
class EpochLog:
    epoch: int
    memory: int
    mean_loss: float
    success_rate: float
    elapsed: float

    def line(self) -> str:
        return (f"epoch {self.epoch}, |M| {self.memory}, loss {self.mean_loss:.4f}, "
                f"success {self.success_rate:.3f}, elapsed {self.elapsed:.1f}s")


@dataclass
class TrainReport:
    epochs: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""
    skipped_states: int = 0
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


class Trainer:
    """Holds the per-problem networks, teachers and memories for one training run."""

    def __init__(self, domain: Domain, tasks: list[GroundTask], cfg: TrainConfig,
                 weights: Weights | None = None):
        if not tasks:
            raise ValueError("need at least one training problem")
        self.cfg = cfg
        self.domain = domain
        self.weights = weights or init_weights(domain, cfg.n_layers, cfg.hidden_size,
                                               child_rng(cfg.seed, "init"))
        self.weights.meta.update({"seed": cfg.seed, "landmarks": cfg.landmarks,
                                  "init": "glorot-uniform", "adam": [cfg.lr, 0.9, 0.999, 1e-8]})
        self.pnets, self.teachers, self.memories = [], [], []
        self._enveloped: list[set[State]] = []
        for i, task in enumerate(tasks):
            heur = HeuristicCache(task)
            pnet = ProblemNet(task, self.weights, cfg.landmarks, heur)
            self.pnets.append(pnet)
            self.teachers.append(Teacher(task, cfg.heuristic, cfg.epsilon, cfg.penalty,
                                         seed=int(child_rng(cfg.seed, "teacher", i).integers(2**31)),
                                         heuristics=heur))
            self.memories.append(StateMemory(pnet))
            self._enveloped.append(set())
        self.adam = Adam(cfg.lr)
        self.skipped = 0

    @property
    def memory_size(self) -> int:
        return sum(len(m) for m in self.memories)

    # -- exploration ---------------------------------------------------------

    def _label_and_insert(self, i: int, s: State, deadline: float | None) -> None:
        """Insert ``s`` and its teacher envelope into problem ``i``'s memory."""
        if s in self._enveloped[i]:
            return
        teacher, mem = self.teachers[i], self.memories[i]
        budget = self.cfg.teacher_state_budget
        if deadline is not None:
            left = max(0.0, deadline - time.monotonic())
            budget = left if budget is None else min(budget, left)
        if not teacher.solve(s, time_budget=budget):
            self.skipped += 1
            log.info("teacher did not converge on a state of %s; skipped", self.pnets[i].task.name)
            return
        self._enveloped[i].add(s)
        for t in teacher.envelope(s):
            if t not in mem and not is_terminal(teacher.task, t):
                if t != s and not teacher.solve(t, time_budget=budget):
                    self.skipped += 1
                    continue
                mem.add(t, teacher.labels(t))

    def explore_epoch(self, epoch: int) -> float:
        """Sample trajectories from the current policy; return the goal-reaching rate."""
        cfg = self.cfg
        per = cfg.explore_per_problem(len(self.pnets))
        deadline = None
        if cfg.teacher_epoch_budget is not None:
            deadline = time.monotonic() + cfg.teacher_epoch_budget
        successes = total = 0
        for i, pnet in enumerate(self.pnets):
            rng = child_rng(cfg.seed, "explore", epoch, i)
            task = pnet.task
            for _ in range(per):
                s = task.init
                visited = []
                steps = 0
                while not is_terminal(task, s) and steps < cfg.step_limit:
                    visited.append(s)
                    p = pnet.probs(s)
                    a = int(rng.choice(len(p), p=p))
                    s, _ = sample_transition(task, s, a, rng)
                    steps += 1
                total += 1
                successes += is_goal(task, s)
                for v in visited:
                    self._label_and_insert(i, v, deadline)
        return successes / total if total else 0.0

    # -- learning ------------------------------------------------------------

    def learn_epoch(self, epoch: int) -> float:
        """``train_batches`` Adam steps; returns the mean per-batch data loss."""
        cfg = self.cfg
        sizes = np.array([len(m) for m in self.memories])
        total = int(sizes.sum())
        if total == 0:
            raise EmptyMemory("no labelled states to learn from")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        rng = child_rng(cfg.seed, "learn", epoch)
        losses = []
        for _ in range(cfg.train_batches):
            pick = rng.integers(0, total, size=cfg.batch_size)
            loss, grads = self.batch_loss_and_grad(pick, offsets, rng)
            losses.append(loss)
            self.adam.step(self.weights, grads)
        return float(np.mean(losses))

    def batch_loss_and_grad(self, pick: np.ndarray, offsets: np.ndarray, rng):
        cfg = self.cfg
        grads: dict = {}
        data_loss = 0.0
        for i, mem in enumerate(self.memories):
            sel = pick[(pick >= offsets[i]) & (pick < offsets[i + 1])] - offsets[i]
            if sel.size == 0:
                continue
            x, y = mem.arrays()
            _, dl, g = self.pnets[i].net.loss_and_grad(x.take(sel), y[sel], l2=0.0, train=True,
                                                      rng=rng, dropout=cfg.dropout)
            data_loss += dl
            add_grads(grads, g)
        if cfg.l2:
            for k, W in self.weights.W.items():
                grads[("W", k)] = grads[("W", k)] + 2.0 * cfg.l2 * W
        return data_loss, grads

    # -- main loop -------------------------------------------------------------

    def train(self, progress=None) -> tuple[Weights, TrainReport]:
        cfg = self.cfg
        start = time.monotonic()
        report = TrainReport()
        best = self.weights.copy()
        best_score = -1.0
        history: list[float] = []
        best_smoothed = -1.0
        stale = 0
        epoch = 0
        while True:
            elapsed = time.monotonic() - start
            if elapsed >= cfg.time_limit:
                report.stop_reason = "time limit"
                break
            if cfg.max_epochs is not None and epoch >= cfg.max_epochs:
                report.stop_reason = "max epochs"
                break
            epoch += 1
            rate = self.explore_epoch(epoch)
            if self.memory_size == 0:
                raise TeacherBudgetExhausted("the teacher could not label any state")
            loss = self.learn_epoch(epoch)
            history.append(rate)
            entry = EpochLog(epoch, self.memory_size, loss, rate, time.monotonic() - start)
            report.epochs.append(entry)
            log.info(entry.line())
            if progress is not None:
                progress(entry)
            # exploration ran with the pre-update weights, so the rate scores those;
            # the post-update weights are kept when the smoothed rate is at its best
            smoothed = float(np.mean(history[-cfg.plateau_window:]))
            if smoothed >= best_score:
                best_score = smoothed
                best = self.weights.copy()
                report.best_epoch = epoch
            if smoothed > best_smoothed + cfg.plateau_threshold:
                best_smoothed = smoothed
                stale = 0
            else:
                stale += 1
                if stale >= cfg.plateau_window:
                    report.stop_reason = "plateau"
                    break
        report.skipped_states = self.skipped
        report.elapsed = time.monotonic() - start
        best.meta.update(self.weights.meta)
        return best, report


def train(domain: Domain, tasks: list[GroundTask], cfg: TrainConfig | None = None,
          progress=None) -> tuple[Weights, TrainReport]:
    return Trainer(domain, tasks, cfg or TrainConfig()).train(progress)
