import math

import pytest

from asnets.generators import KINDS, generate
from asnets.grounder import ground
from asnets.heuristics import (HeuristicCache, LandmarkSet, brute_force_relaxed_cost,
                               determinize_relax, hadd, hmax, landmark_flag_matrix,
                               landmark_flags, lmcut)
from asnets.ppddl import parse_domain, parse_problem

from toys import random_toy_task, strips_task


def _gen(kind, size):
    dtext, ptext = generate(kind, size)
    d = parse_domain(dtext)
    return ground(d, parse_problem(ptext, d))


def _action(task, name):
    return next(a for a in range(task.n_actions) if task.action_name(a) == name)


def test_relaxed_op_count():
    t = _gen("pbw", 4)
    r = determinize_relax(t)
    assert r.n_ops == sum(len(a.outcomes) for a in t.actions)
    pick = next(a for a in range(t.n_actions) if t.action_name(a).startswith("(pick-up "))
    assert r.origin.count(pick) == 2


def test_deterministic_action_one_relaxed_op():
    t = _gen("cosanostra", 1)
    r = determinize_relax(t)
    assert r.origin.count(_action(t, "(load-pizza shop)")) == 1


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("size", [1, 2, 3])
def test_goal_relaxed_reachable(kind, size):
    t = _gen(kind, size)
    assert hmax(determinize_relax(t), t.init) < math.inf


CHAIN = dict(
    props=["a", "b", "g"],
    actions={"ab": (["a"], [(1, ["b"], [])], 1), "bg": (["b"], [(1, ["g"], [])], 1)},
    init=["a"], goal=["g"])


def test_hadd_chain():
    t = strips_task(**CHAIN)
    assert hadd(determinize_relax(t), t.init) == 2


def test_goal_state_values():
    t = strips_task(**CHAIN)
    r = determinize_relax(t)
    s = t.state_from_atoms(t.props)
    assert hadd(r, s) == 0
    lms = lmcut(r, s)
    assert lms.hvalue == 0 and lms.landmarks == []


def test_unreachable_goal():
    t = strips_task(props=["a", "g"], actions={"x": (["g"], [(1, ["a"], [])], 1)},
                    init=["a"], goal=["g"])
    r = determinize_relax(t)
    assert hadd(r, t.init) == math.inf
    lms = lmcut(r, t.init)
    assert lms.unreachable and lms.hvalue == math.inf and lms.landmarks == []


def test_single_achiever_singleton_landmark():
    t = strips_task(props=["a", "g"], actions={"x": (["a"], [(1, ["g"], [])], 1)},
                    init=["a"], goal=["g"])
    lms = lmcut(determinize_relax(t), t.init)
    assert lms.hvalue == 1
    assert lms.landmarks == [frozenset({0})]


def test_two_achievers_one_landmark():
    t = strips_task(props=["a", "b", "g", "z"],
                    actions={"x": (["a"], [(1, ["g"], [])], 1),
                             "y": (["b"], [(1, ["g"], [])], 1)},
                    init=["a", "b"], goal=["g"])
    r = determinize_relax(t)
    lms = lmcut(r, t.init)
    assert lms.hvalue == 1
    assert lms.landmarks == [frozenset({0, 1})]
    assert lms.hvalue <= brute_force_relaxed_cost(r, t.init)


def _flag_task():
    # a1 is the only way to p, and one of three ways to q; e is the only way to r
    return strips_task(
        props=["p", "q", "r", "z"],
        actions={
            "a1": ([], [("1/2", ["p"], []), ("1/2", ["q"], [])], 1),
            "b1": ([], [(1, ["q"], [])], 1),
            "c1": ([], [(1, ["q"], [])], 1),
            "e1": ([], [(1, ["r"], [])], 1),
            "idle": ([], [(1, ["z"], [])], 1),
        },
        init=[], goal=["p", "q", "r"])


def test_flags_from_lmcut_task():
    t = _flag_task()
    lms = lmcut(determinize_relax(t), t.init)
    assert lms.hvalue == 3
    assert landmark_flags(lms, _action(t, "(a1)")) == (1, 1, 0)
    assert landmark_flags(lms, _action(t, "(e1)")) == (1, 0, 0)
    assert landmark_flags(lms, _action(t, "(b1)")) == (0, 1, 0)
    assert landmark_flags(lms, _action(t, "(idle)")) == (0, 0, 1)


def test_flag_matrix_matches_flags():
    t = _flag_task()
    lms = lmcut(determinize_relax(t), t.init)
    mat = landmark_flag_matrix(lms, t.n_actions)
    for a in range(t.n_actions):
        assert tuple(int(x) for x in mat[a]) == landmark_flags(lms, a)


def test_flags_partition():
    lms = LandmarkSet([frozenset({0}), frozenset({0, 1, 2}), frozenset({3, 1})], 3.0)
    for a in range(6):
        c1, c2, c3 = landmark_flags(lms, a)
        assert (c3 == 1) != (c1 + c2 >= 1)


@pytest.mark.parametrize("seed", range(50))
def test_random_toy_properties(seed):
    t = random_toy_task(seed)
    r = determinize_relax(t)
    states = [t.init] + [t.init | (1 << p) for p in range(t.n_props)]
    for s in states:
        lm = lmcut(r, s).hvalue
        best = brute_force_relaxed_cost(r, s)
        hm = hmax(r, s)
        ha = hadd(r, s)
        assert lm <= best + 1e-9
        assert ha >= hm
        assert lm >= hm - 1e-9
        assert (best == math.inf) == (lm == math.inf)


@pytest.mark.parametrize("seed", range(10))
def test_monotone_under_adding_props(seed):
    t = random_toy_task(seed, max_props=8)
    r = determinize_relax(t)
    for s in range(1 << t.n_props):
        base_lm, base_add = lmcut(r, s).hvalue, hadd(r, s)
        for p in range(t.n_props):
            bigger = s | (1 << p)
            assert lmcut(r, bigger).hvalue <= base_lm + 1e-9
            assert hadd(r, bigger) <= base_add + 1e-9


def test_cache_values():
    t = _gen("ttw", 1)
    c = HeuristicCache(t)
    assert c.value("lmcut", t.init) == lmcut(c.relaxed, t.init).hvalue
    assert c.value("zero", t.init) == 0
    with pytest.raises(ValueError):
        c.value("nope", t.init)
