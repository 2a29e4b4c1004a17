"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` (or as part of the full
suite); ``-m "not slow"`` skips the training reproductions.
"""

import time
from functools import lru_cache

import numpy as np
import pytest

from asnets.evaluate import evaluate
from asnets.features import ProblemNet
from asnets.generators import generate
from asnets.grounder import build_network_spec, ground
from asnets.heuristics import brute_force_relaxed_cost, determinize_relax, hadd, hmax, lmcut
from asnets.model import ASNet, init_weights, load_weights, save_weights
from asnets.ppddl import parse_domain, parse_problem
from asnets.selftest import ORACLE_CASES, gradient_check, oracle_check, toy_task
from asnets.ssp import applicable, sample_transition
from asnets.trainer import TrainConfig, train

from toys import random_toy_task

EVAL_SEED = 7
TRIALS = 30


def report(capsys, ok: bool, name: str, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {name}: {detail}")


def _domain(kind):
    return parse_domain(generate(kind, 1)[0])


def _task(kind, size, seed=0):
    d = _domain(kind)
    return ground(d, parse_problem(generate(kind, size, seed)[1], d))


@lru_cache(maxsize=None)
def trained(kind, sizes, landmarks=True, n_layers=2, heuristic="lmcut", time_limit=1800.0,
            seeds=(0,)):
    d = _domain(kind)
    tasks = [ground(d, parse_problem(generate(kind, n, s)[1], d)) for n in sizes for s in seeds]
    cfg = TrainConfig(time_limit=time_limit, landmarks=landmarks, n_layers=n_layers,
                      heuristic=heuristic, hidden_size=16, seed=0)
    start = time.monotonic()
    weights, rep = train(d, tasks, cfg)
    return weights, rep, time.monotonic() - start


def _evaluate(weights, kind, sizes, landmarks=True, seed=0):
    return {n: evaluate(weights, _task(kind, n, seed), TRIALS, EVAL_SEED, landmarks=landmarks)
            for n in sizes}


def _fmt(reports):
    return ", ".join(f"n{n} {r.coverage}/{r.trials} cost {r.mean_cost:.2f}"
                     for n, r in reports.items())


# -- 1 ------------------------------------------------------------------------

def test_c1_gradient_exactness(capsys):
    t = toy_task()
    start = time.monotonic()
    res = gradient_check(t, n_layers=1, hidden_size=4, h=1e-4)
    took = time.monotonic() - start
    ok = t.n_props <= 4 and t.n_actions <= 3 and res.max_rel_error < 1e-4 and took < 10
    report(capsys, ok, "criterion 1 gradient check",
           f"{res.n_coords} coords, max rel err {res.max_rel_error:.2e}, {took:.1f}s")
    assert ok


# -- 2 ------------------------------------------------------------------------

def test_c2_teacher_matches_oracle(capsys):
    start = time.monotonic()
    rows = oracle_check(ORACLE_CASES, tol=1e-3)
    took = time.monotonic() - start
    ok = all(r[3] for r in rows) and took < 60
    detail = ", ".join(f"{name} {exact:.4f}/{approx:.4f}" for name, exact, approx, _ in rows)
    report(capsys, ok, "criterion 2 LRTDP vs value iteration", f"{detail}; {took:.1f}s")
    assert ok


# -- 3 ------------------------------------------------------------------------

def test_c3_heuristic_sanity(capsys):
    start = time.monotonic()
    bad = []
    for seed in range(50):
        t = random_toy_task(seed, max_props=12)
        r = determinize_relax(t)
        s = t.init
        if not (lmcut(r, s).hvalue <= brute_force_relaxed_cost(r, s) + 1e-9 and hadd(r, s) >= hmax(r, s)):
            bad.append(seed)
    took = time.monotonic() - start
    ok = not bad and took < 60
    report(capsys, ok, "criterion 3 heuristic sanity", f"50 toys, violations {bad}, {took:.1f}s")
    assert ok


# -- 4 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c4_cosanostra(capsys):
    weights, rep, took = trained("cosanostra", (1, 2, 3, 4, 5))
    reps = _evaluate(weights, "cosanostra", range(6, 11))
    ok = all(r.coverage == TRIALS and r.mean_cost == 3 * n + 4 for n, r in reps.items())
    ok = ok and took < 45 * 60
    report(capsys, ok, "criterion 4 CosaNostra",
           f"{_fmt(reps)}; trained {len(rep.epochs)} epochs in {took:.0f}s")
    assert ok


# -- 5 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c5_triangle_tire(capsys):
    weights, rep, took = trained("ttw", (1, 2, 3))
    reps = _evaluate(weights, "ttw", (4, 5, 6))
    ok = all(r.coverage == TRIALS for r in reps.values()) and 21.0 <= reps[4].mean_cost <= 26.0
    ok = ok and took < 45 * 60
    report(capsys, ok, "criterion 5 Triangle Tire World",
           f"{_fmt(reps)}; trained {len(rep.epochs)} epochs in {took:.0f}s")
    assert ok


# -- 6 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c6_monster_receptive_field(capsys):
    lines, ok, total = [], True, 0.0
    for depth in (1, 2, 3):
        weights, rep, took = trained("monster", (1, 2, 3, 4, 5), n_layers=depth, time_limit=600.0)
        total += took
        reps = _evaluate(weights, "monster", range(1, 6))
        for n, r in reps.items():
            ok &= r.coverage >= 28 if n <= depth else 8 <= r.coverage <= 22
        lines.append(f"depth {depth}: " + " ".join(f"{r.coverage}" for r in reps.values()))
    ok = ok and total < 30 * 60
    report(capsys, ok, "criterion 6 Monster depth", "; ".join(lines) + f"; {total:.0f}s")
    assert ok


# -- 7 ------------------------------------------------------------------------

@pytest.mark.slow
def test_c7_landmark_ablation(capsys):
    with_lm = _evaluate(trained("cosanostra", (1, 2, 3, 4, 5))[0], "cosanostra", range(6, 11))
    weights, rep, _ = trained("cosanostra", (1, 2, 3, 4, 5), landmarks=False)
    without = _evaluate(weights, "cosanostra", range(6, 11), landmarks=False)
    ok = (all(r.coverage == TRIALS for r in with_lm.values())
          and any(r.coverage < TRIALS for r in without.values()))
    report(capsys, ok, "criterion 7 landmark ablation",
           f"no landmarks: {_fmt(without)}")
    assert ok


# -- 8 ------------------------------------------------------------------------

def _renaming_exact():
    dtext, ptext = generate("cosanostra", 3)
    swapped = ptext.replace("booth-1", "TMP").replace("booth-3", "booth-1").replace("TMP", "booth-3")
    swapped = swapped.replace("booth-3 booth-2 booth-1 - toll-booth",
                              "booth-1 booth-2 booth-3 - toll-booth")
    d = parse_domain(dtext)
    t1, t2 = ground(d, parse_problem(ptext, d)), ground(d, parse_problem(swapped, d))
    rename = {"booth-1": "booth-3", "booth-3": "booth-1"}
    index2 = {t2.action_name(a): a for a in range(t2.n_actions)}
    perm = [index2["(" + " ".join(rename.get(x, x) for x in t1.action_name(a)[1:-1].split()) + ")"]
            for a in range(t1.n_actions)]
    w = init_weights(d, 2, 16, 0)
    n1, n2 = ProblemNet(t1, w, landmarks=False), ProblemNet(t2, w, landmarks=False)
    for s in _walk_states(t1, 100):
        s2 = t2.state_from_atoms(type(a)(a.predicate, tuple(rename.get(x, x) for x in a.args))
                                 for a in t1.state_atoms(s))
        if not np.array_equal(n1.probs(s), n2.probs(s2)[perm]):
            return False
    return perm != list(range(t1.n_actions))


def _walk_states(task, n, seed=0):
    rng = np.random.default_rng(seed)
    s, out = task.init, []
    while len(out) < n:
        acts = applicable(task, s)
        if not acts:
            s = task.init
            continue
        out.append(s)
        s, _ = sample_transition(task, s, acts[rng.integers(len(acts))], rng)
    return out


def _normalized():
    t = _task("pbw", 5)
    w = init_weights(t.domain, 2, 16, 1)
    pnet = ProblemNet(t, w)
    worst = 0.0
    for s in _walk_states(t, 100):
        p = pnet.probs(s)
        mask = np.zeros(t.n_actions, dtype=bool)
        mask[list(applicable(t, s))] = True
        if p[~mask].any():
            return np.inf
        worst = max(worst, abs(p.sum() - 1.0))
    return worst


def _pooling_exact():
    t = _task("pbw", 4)
    w = init_weights(t.domain, 2, 8, 0)
    spec = build_network_spec(t, 2, 8)
    x = ProblemNet(t, w).feats.inputs(_walk_states(t, 10))
    base = ASNet(spec, w).forward(x)
    rng = np.random.default_rng(0)
    for slots in spec.pool:
        for k, arr in enumerate(slots):
            slots[k] = arr[:, rng.permutation(arr.shape[1])]
    return np.array_equal(base, ASNet(spec, w).forward(x))


def _roundtrip_exact(tmp_path):
    d = _domain("ttw")
    w = init_weights(d, 2, 16, 5)
    path = tmp_path / "w.bin"
    save_weights(w, path, {"seed": 5})
    back = load_weights(path, d)
    return all(np.array_equal(a, b) and a.dtype == b.dtype
               for (_, _, a), (_, _, b) in zip(w.arrays(), back.arrays()))


def _reproducible():
    d = _domain("cosanostra")
    tasks = [_task("cosanostra", n) for n in (1, 2)]
    cfg = TrainConfig(max_epochs=2, train_batches=20, seed=11)
    runs = []
    for _ in range(2):
        w, _ = train(d, tasks, cfg)
        runs.append((w.flat(), evaluate(w, _task("cosanostra", 4), 10, seed=3).line()))
    return np.array_equal(runs[0][0], runs[1][0]) and runs[0][1] == runs[1][1]


def test_c8_invariants(capsys, tmp_path):
    start = time.monotonic()
    checks = {"renaming": _renaming_exact(), "normalization": _normalized() <= 1e-12,
              "pooling": _pooling_exact(), "round trip": _roundtrip_exact(tmp_path),
              "reproducible": _reproducible()}
    took = time.monotonic() - start
    ok = all(checks.values()) and took < 60
    report(capsys, ok, "criterion 8 invariants",
           ", ".join(f"{k} {'ok' if v else 'broken'}" for k, v in checks.items()) + f"; {took:.1f}s")
    assert ok


# -- PBW surrogate ------------------------------------------------------------

@pytest.mark.slow
def test_pbw_surrogate(capsys):
    weights, rep, took = trained("pbw", (4, 5, 6), heuristic="hadd")
    reps = _evaluate(weights, "pbw", (7, 8))
    ok = all(r.coverage >= 27 for r in reps.values())
    report(capsys, ok, "PBW surrogate", f"{_fmt(reps)}; trained {len(rep.epochs)} epochs in {took:.0f}s")
    assert ok
