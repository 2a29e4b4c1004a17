import numpy as np
import pytest

from asnets.evaluate import evaluate
from asnets.features import ProblemNet
from asnets.generators import (KINDS, _loc, generate, ttw_locations, ttw_outer_edge)
from asnets.grounder import ground
from asnets.model import init_weights
from asnets.ppddl import parse_domain, parse_problem
from asnets.ssp import applicable, sample_transition, successors
from asnets.teacher import value_iteration


def _gen(kind, size, seed=0):
    dtext, ptext = generate(kind, size, seed)
    d = parse_domain(dtext)
    return d, ground(d, parse_problem(ptext, d))


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("size", [1, 2, 3, 5])
def test_deterministic_and_grounds(kind, size):
    assert generate(kind, size, 3) == generate(kind, size, 3)
    _, t = _gen(kind, size, 3)
    assert t.n_actions > 0 and applicable(t, t.init)


@pytest.mark.parametrize("kind", KINDS)
def test_bad_size(kind):
    with pytest.raises(ValueError):
        generate(kind, 0)


def test_unknown_kind():
    with pytest.raises(ValueError):
        generate("sokoban", 2)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_ttw_location_count(n):
    assert len(ttw_locations(n)) == (n + 1) * (2 * n + 1)
    _, t = _gen("ttw", n)
    locs = {a.args[0] for a in t.props if a.predicate == "vehicle-at"}
    assert len(locs) == (n + 1) * (2 * n + 1)


@pytest.mark.parametrize("n", [1, 2])
def test_ttw_outer_edge_is_optimal(n):
    _, t = _gen("ttw", n)
    vt = value_iteration(t)
    outer = {_loc(*x) for x in ttw_outer_edge(n)}
    q = {}
    for a in applicable(t, t.init):
        dest = t.action_name(a)[1:-1].split()[2]
        q[dest in outer] = min(q.get(dest in outer, np.inf),
                               t.costs[a] + sum(p * vt.values[s] for p, s in successors(t, t.init, a)))
    assert q[True] < q[False]


@pytest.mark.parametrize("n", range(1, 7))
def test_cosanostra_optimal_cost(n):
    _, t = _gen("cosanostra", n)
    assert value_iteration(t).values[t.init] == 3 * n + 4


def test_pbw_blocks_and_goal():
    _, t = _gen("pbw", 5, seed=11)
    blocks = {a.args[0] for a in t.props if a.predicate == "on-table"}
    assert len(blocks) == 5
    goal = [t.props[p] for p in t.goal]
    below = {}
    for a in goal:
        if a.predicate == "on":
            assert a.args[0] not in below
            below[a.args[0]] = a.args[1]
    for b in below:
        seen, x = set(), b
        while x in below:
            assert x not in seen
            seen.add(x)
            x = below[x]
    assert generate("pbw", 5, 11) != generate("pbw", 5, 12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_monster_optimal_takes_safe_path(n):
    _, t = _gen("monster", n)
    # spawn, n moves, then the safe exit
    assert value_iteration(t).values[t.init] == n + 2


def test_monster_shallow_net_cannot_tell_paths_apart():
    d, t = _gen("monster", 3)
    pnet = ProblemNet(t, init_weights(d, 1, 16, 0))
    spawn = applicable(t, t.init)[0]
    for _, s in successors(t, t.init, spawn):
        names = {t.action_name(a): a for a in applicable(t, s)}
        p = pnet.probs(s)
        assert p[names["(move start a-1)"]] == p[names["(move start b-1)"]]


def test_monster_zero_weights_blind_choice():
    d, t = _gen("monster", 5)
    w = init_weights(d, 2, 16, 0)
    for _, _, arr in w.arrays():
        arr[...] = 0.0
    rep = evaluate(w, t, trials=30, seed=0)
    assert 8 <= rep.coverage <= 22


def test_ttw_flat_tyre_random_walk_reproducible():
    _, t = _gen("ttw", 2)
    rng1, rng2 = np.random.default_rng(4), np.random.default_rng(4)
    a = applicable(t, t.init)[0]
    assert [sample_transition(t, t.init, a, rng1)[0] for _ in range(20)] == \
           [sample_transition(t, t.init, a, rng2)[0] for _ in range(20)]
