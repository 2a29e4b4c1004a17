import json

import numpy as np
import pytest

from asnets.errors import CapacityError
from asnets.generators import generate, ttw_locations
from asnets.grounder import build_network_spec, domain_fingerprint, dump_task, ground
from asnets.ppddl import parse_domain, parse_problem

from test_ppddl import HOME_WORK, WALK


def _walk_task():
    d = parse_domain(WALK)
    return ground(d, parse_problem(HOME_WORK, d))


def _gen_task(kind, size, seed=0, **kw):
    dtext, ptext = generate(kind, size, seed)
    d = parse_domain(dtext)
    return ground(d, parse_problem(ptext, d), **kw)


def test_walk_grounding():
    t = _walk_task()
    assert [t.prop_name(p) for p in range(t.n_props)] == ["(at home)", "(at work)"]
    assert sorted(t.action_name(a) for a in range(t.n_actions)) == [
        "(walk home work)", "(walk work home)"]


def test_walk_related_props_ordering():
    t = _walk_task()
    a = next(i for i in range(t.n_actions) if t.action_name(i) == "(walk home work)")
    assert [t.prop_name(p) for p in t.related_props(a)] == ["(at home)", "(at work)"]
    patterns = {tuple(t.props[p].predicate for p in t.related_props(i)) for i in range(t.n_actions)}
    assert patterns == {("at", "at")}


def test_empty_precondition_single_add():
    text = """
(define (domain d) (:requirements :strips)
  (:predicates (p))
  (:action make :parameters () :effect (p)))
"""
    d = parse_domain(text)
    p = parse_problem("(define (problem x) (:domain d) (:init) (:goal (p)))", d)
    t = ground(d, p)
    assert t.n_actions == 1 and len(t.related_props(0)) == 1


def test_ttw_location_count():
    t = _gen_task("ttw", 1)
    locs = {a.args[0] for a in t.props if a.predicate == "vehicle-at"}
    assert len(locs) == len(ttw_locations(1)) == 6


def test_zero_objects_of_a_type():
    text = """
(define (domain d) (:requirements :strips :typing)
  (:types a b)
  (:predicates (p ?x - a) (q ?y - b))
  (:action use-b :parameters (?y - b) :precondition (q ?y) :effect (not (q ?y)))
  (:action use-a :parameters (?x - a) :precondition (p ?x) :effect (not (p ?x))))
"""
    d = parse_domain(text)
    p = parse_problem("(define (problem x) (:domain d) (:objects o - a) (:init (p o)) (:goal (p o)))", d)
    t = ground(d, p)
    assert t.schema_ranges[0] == (0, 0)
    assert t.n_actions == 1


def test_capacity_error():
    with pytest.raises(CapacityError):
        _gen_task("pbw", 6, capacity=10)


def test_relatedness_definition():
    t = _gen_task("cosanostra", 2)
    for act in t.actions:
        rel = set(act.related)
        expected = set(act.pre)
        for o in act.outcomes:
            if o.probability > 0:
                expected |= set(o.add) | set(o.delete)
        assert rel == expected


def test_same_schema_same_pattern():
    t = _gen_task("pbw", 4)
    for s, (lo, hi) in enumerate(t.schema_ranges):
        pats = {tuple(t.props[p].predicate for p in t.related_props(a)) for a in range(lo, hi)}
        assert len(pats) <= 1


def test_deterministic_indices():
    a, b = _gen_task("ttw", 2), _gen_task("ttw", 2)
    assert a.props == b.props
    assert [x.name for x in a.actions] == [x.name for x in b.actions]
    assert json.dumps(dump_task(a)) == json.dumps(dump_task(b))


def test_static_pruning_switch():
    pruned = _gen_task("ttw", 1)
    full = _gen_task("ttw", 1, prune_static=False)
    assert full.n_actions > pruned.n_actions
    assert {x.name for x in pruned.actions} <= {x.name for x in full.actions}


def test_renaming_equivariance():
    dtext, ptext = generate("cosanostra", 3)
    d = parse_domain(dtext)
    renamed = ptext.replace("booth-1", "tmp").replace("booth-3", "booth-1").replace("tmp", "booth-3")
    t1 = ground(d, parse_problem(ptext, d))
    t2 = ground(d, parse_problem(renamed, d))
    sigma = {"booth-1": "booth-3", "booth-3": "booth-1"}
    props1 = {t1.prop_name(p) for p in range(t1.n_props)}
    mapped = set()
    for a in t1.props:
        mapped.add(str(type(a)(a.predicate, tuple(sigma.get(x, x) for x in a.args))))
    assert mapped == {t2.prop_name(p) for p in range(t2.n_props)}
    assert len(props1) == len(mapped)
    rel2 = {t2.action_name(a): [t2.prop_name(p) for p in t2.related_props(a)]
            for a in range(t2.n_actions)}
    for a in range(t1.n_actions):
        act = t1.actions[a]
        name = "(" + " ".join([d.schemas[act.schema].name] + [sigma.get(x, x) for x in act.args]) + ")"
        rel1 = []
        for p in t1.related_props(a):
            atom = t1.props[p]
            rel1.append(str(type(atom)(atom.predicate, tuple(sigma.get(x, x) for x in atom.args))))
        assert rel2[name] == rel1


def test_network_layers():
    t = _walk_task()
    assert build_network_spec(t, 2, 16).layers == ["act", "prop", "act", "prop", "act"]
    assert build_network_spec(t, 0, 16).layers == ["act"]


def test_walk_first_layer_dim():
    spec = build_network_spec(_walk_task(), 2, 16)
    assert spec.schema_M == [2]
    assert spec.feature_dim(0) == 7


@pytest.mark.parametrize("kind", ["ttw", "cosanostra", "pbw", "monster"])
@pytest.mark.parametrize("n_layers", [0, 1, 2, 3])
def test_weight_key_count(kind, n_layers):
    t = _gen_task(kind, 2)
    shapes = build_network_spec(t, n_layers, 8).param_shapes()
    d = t.domain
    assert len(shapes) == (n_layers + 1) * len(d.schemas) + n_layers * len(d.predicates)


def test_shapes_independent_of_problem():
    s1 = build_network_spec(_gen_task("ttw", 1), 2, 16).param_shapes()
    s3 = build_network_spec(_gen_task("ttw", 3), 2, 16).param_shapes()
    assert s1 == s3


def test_pool_wiring_matches_relatedness():
    t = _gen_task("cosanostra", 2)
    spec = build_network_spec(t, 1, 4)
    for f, (lo, hi) in enumerate(spec.pred_ranges):
        for k, s in enumerate(spec.pred_slots[f]):
            arr = spec.pool[f][k]
            for i, p in enumerate(range(lo, hi)):
                got = sorted(a for a in arr[i] if a < t.n_actions)
                want = sorted(a for a in range(t.n_actions)
                              if t.actions[a].schema == s and p in t.related_props(a))
                assert got == want


def test_fingerprint_is_domain_level():
    a = _gen_task("ttw", 1)
    b = _gen_task("ttw", 3)
    assert domain_fingerprint(a.domain) == domain_fingerprint(b.domain)


def test_dump_json_fields():
    t = _walk_task()
    out = dump_task(t, build_network_spec(t, 2, 16))
    assert set(out) >= {"props", "actions", "init", "goal", "network"}
    assert out["network"]["schemas"]["walk"]["input_dim"] == 7
    assert np.all([len(a["related"]) == 2 for a in out["actions"]])
