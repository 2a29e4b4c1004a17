"""Built-in consistency checks shared by ``asnet selftest`` and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generators import generate
from .grounder import GroundTask, build_network_spec, ground
from .model import ASNet, Inputs, Weights, init_weights
from .ppddl import parse_domain, parse_problem
from .teacher import lrtdp_solve, value_iteration

TOY_DOMAIN = """
(define (domain toy)
  (:requirements :typing :probabilistic-effects :equality)
  (:types loc)
  (:constants a b - loc)
  (:predicates (at ?l - loc) (visited ?l - loc))
  (:action move
    :parameters (?from ?to - loc)
    :precondition (and (at ?from) (not (= ?from ?to)))
    :effect (probabilistic 0.9 (and (at ?to) (not (at ?from)) (visited ?to))))
  (:action wait
    :parameters ()
    :effect (probabilistic 0.5 (visited a))))
"""

TOY_PROBLEM = """
(define (problem toy-2)
  (:domain toy)
  (:init (at a))
  (:goal (and (visited a) (visited b))))
"""


def toy_task() -> GroundTask:
    d = parse_domain(TOY_DOMAIN)
    return ground(d, parse_problem(TOY_PROBLEM, d))


@dataclass
class GradCheck:
    max_rel_error: float
    n_coords: int
    loss: float


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradient_check(task: GroundTask | None = None, n_layers: int = 1, hidden_size: int = 4,
                   h: float = 1e-4, seed: int = 0, l2: float = 1e-3,
                   batch: int = 6) -> GradCheck:
    """Compare every coordinate's analytic gradient with central differences.

    Inputs are random truth vectors and flags with all actions enabled, so
    every weight influences the loss; dropout is off.
    """
    task = task or toy_task()
    rng = np.random.default_rng(seed)
    spec = build_network_spec(task, n_layers, hidden_size)
    w: Weights = init_weights(task.domain, n_layers, hidden_size, rng)
    for _, _, arr in w.arrays():
        arr += rng.normal(0.0, 0.5, arr.shape)
    A, P = task.n_actions, task.n_props
    x = Inputs(rng.integers(0, 2, (batch, P)).astype(float),
               rng.integers(0, 2, (batch, A, 3)).astype(float),
               np.ones((batch, A), dtype=bool))
    y = np.zeros((batch, A))
    y[np.arange(batch), rng.integers(0, A, batch)] = 1.0
    net = ASNet(spec, w)
    loss, _, grads = net.loss_and_grad(x, y, l2=l2)
    worst, count = 0.0, 0
    for tag, key, arr in w.arrays():
        g = grads[(tag, key)]
        for j in range(arr.size):
            old = arr.flat[j]
            arr.flat[j] = old + h
            up = net.loss_and_grad(x, y, l2=l2)[0]
            arr.flat[j] = old - h
            down = net.loss_and_grad(x, y, l2=l2)[0]
            arr.flat[j] = old
            worst = max(worst, relative_error(g.flat[j], (up - down) / (2 * h)))
            count += 1
    return GradCheck(worst, count, loss)


ORACLE_CASES = (("ttw", 1), ("cosanostra", 1), ("cosanostra", 2), ("cosanostra", 3),
                ("monster", 1), ("monster", 2), ("pbw", 4))


def oracle_check(cases=ORACLE_CASES, tol: float = 1e-3) -> list[tuple[str, float, float, bool]]:
    """LRTDP value at the initial state against exact value iteration."""
    rows = []
    for kind, size in cases:
        dtext, ptext = generate(kind, size)
        d = parse_domain(dtext)
        task = ground(d, parse_problem(ptext, d))
        exact = value_iteration(task).values[task.init]
        vt = lrtdp_solve(task, heuristic="lmcut", epsilon=1e-4, penalty=500.0)
        approx = vt.values[task.init]
        rows.append((f"{kind}-{size}", exact, approx, vt.converged and abs(exact - approx) <= tol))
    return rows
