"""Grounding of a lifted domain into a factored SSP plus ASNet wiring.

Ground actions are ordered by schema (domain declaration order) and then by
parameter tuple in object declaration order; propositions likewise by
predicate.  Both index sets are therefore contiguous per schema/predicate,
which the network code relies on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapacityError
from .ppddl import ActionSchema, Atom, Domain, Problem

DEFAULT_CAPACITY = 10**6


@dataclass(frozen=True)
class GroundOutcome:
    probability: Fraction
    add: tuple[int, ...]
    delete: tuple[int, ...]


@dataclass(frozen=True)
class GroundAction:
    schema: int
    args: tuple[str, ...]
    pre: tuple[int, ...]
    outcomes: tuple[GroundOutcome, ...]
    cost: float
    related: tuple[int, ...]
    name: str = ""


# ---------------------------------------------------------------------------
# schema-level structure (depends only on the domain)


def schema_templates(schema: ActionSchema) -> tuple[Atom, ...]:
    """Lifted related-proposition list of a schema in canonical order.

    Precondition atoms in textual order, then each outcome's adds followed by
    its deletes; repeated atoms keep their first slot.
    """
    seen: dict[Atom, None] = {}
    for a in schema.precondition:
        seen.setdefault(a)
    for e in schema.effects:
        for a in e.add:
            seen.setdefault(a)
        for a in e.delete:
            seen.setdefault(a)
    return tuple(seen)


def predicate_slots(domain: Domain) -> dict[str, tuple[int, ...]]:
    """Schemas (by index) referencing each predicate; the pooling slots A_1..A_L."""
    slots: dict[str, list[int]] = {p.name: [] for p in domain.predicates}
    for i, s in enumerate(domain.schemas):
        for a in schema_templates(s):
            if i not in slots[a.predicate]:
                slots[a.predicate].append(i)
    return {k: tuple(v) for k, v in slots.items()}


def static_predicates(domain: Domain) -> set[str]:
    changing = set()
    for s in domain.schemas:
        for e in s.effects:
            changing.update(a.predicate for a in e.add)
            changing.update(a.predicate for a in e.delete)
    return {p.name for p in domain.predicates} - changing


def domain_fingerprint(domain: Domain) -> dict:
    """Everything the network's parameter shapes depend on."""
    slots = predicate_slots(domain)
    return {
        "domain": domain.name,
        "schemas": [[s.name, len(schema_templates(s))] for s in domain.schemas],
        "predicates": [[p.name, len(slots[p.name])] for p in domain.predicates],
    }


# ---------------------------------------------------------------------------
# ground task


@dataclass
class GroundTask:
    domain: Domain
    problem: Problem
    props: list[Atom]
    actions: list[GroundAction]
    init: int
    goal: tuple[int, ...]
    schema_ranges: list[tuple[int, int]]
    pred_ranges: list[tuple[int, int]]
    prop_index: dict[Atom, int] = field(repr=False)

    def __post_init__(self):
        self.goal_mask = _mask(self.goal)
        self.pre_masks = [_mask(a.pre) for a in self.actions]
        # (probability as float, add mask, clear mask) per outcome
        self.outcome_masks = [
            [(float(o.probability), _mask(o.add), ~_mask(o.delete)) for o in a.outcomes]
            for a in self.actions
        ]
        self.costs = np.array([a.cost for a in self.actions], dtype=float)
        self._applicable_cache: dict[int, tuple[int, ...]] = {}

    @property
    def name(self) -> str:
        return self.problem.name

    @property
    def n_props(self) -> int:
        return len(self.props)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_name(self, a: int) -> str:
        act = self.actions[a]
        return f"({' '.join((self.domain.schemas[act.schema].name,) + act.args)})"

    def prop_name(self, p: int) -> str:
        return str(self.props[p])

    def related_props(self, a: int) -> tuple[int, ...]:
        return self.actions[a].related

    def state_from_atoms(self, atoms) -> int:
        return _mask(self.prop_index[a] for a in atoms)

    def state_atoms(self, s: int) -> list[Atom]:
        return [self.props[p] for p in range(self.n_props) if s >> p & 1]

    def state_bits(self, s: int) -> np.ndarray:
        """Boolean vector of length ``n_props``."""
        raw = np.frombuffer(s.to_bytes((self.n_props + 7) // 8 or 1, "little"), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.n_props].astype(bool)


def _mask(indices) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def _objects_by_type(domain: Domain, problem: Problem) -> tuple[dict[str, list[str]], dict[str, int]]:
    objs = list(domain.constants) + list(problem.objects)
    order = {o.name: i for i, o in enumerate(objs)}
    types = {"object"} | {t for t, _ in domain.types} | {p for _, p in domain.types}
    table = {t: [o.name for o in objs if domain.is_subtype(o.type, t)] for t in types}
    return table, order


def ground(domain: Domain, problem: Problem, prune_static: bool = True,
           capacity: int = DEFAULT_CAPACITY) -> GroundTask:
    """Instantiate ``domain`` with the objects of ``problem``.

    With ``prune_static`` (the default) ground actions whose precondition
    contains a false static fact are dropped; such actions can never be
    applied.  Bindings under which an outcome would add and delete the same
    atom are always dropped.  Propositions are those in the initial state,
    the goal, or the related list of some kept action.
    """
    by_type, order = _objects_by_type(domain, problem)
    statics = static_predicates(domain) if prune_static else set()
    init_set = set(problem.init)

    raw_actions: list[tuple[int, tuple[str, ...], dict[str, str]]] = []
    for si, schema in enumerate(domain.schemas):
        domains = [by_type.get(p.type, []) for p in schema.params]
        names = [p.name for p in schema.params]
        for combo in itertools.product(*domains):
            binding = dict(zip(names, combo))
            if not _equalities_hold(schema, binding):
                continue
            if statics and any(a.predicate in statics and _bind(a, binding) not in init_set
                               for a in schema.precondition):
                continue
            # bindings that make an outcome add and delete the same atom are degenerate
            if any({_bind(a, binding) for a in e.add} & {_bind(a, binding) for a in e.delete}
                   for e in schema.effects):
                continue
            raw_actions.append((si, combo, binding))
            if len(raw_actions) > capacity:
                raise CapacityError(f"more than {capacity} ground actions")

    templates = [schema_templates(s) for s in domain.schemas]
    atoms: set[Atom] = set(problem.init) | set(problem.goal)
    for si, _, binding in raw_actions:
        atoms.update(_bind(t, binding) for t in templates[si])
    if len(atoms) > capacity:
        raise CapacityError(f"more than {capacity} propositions")

    pred_order = {p.name: i for i, p in enumerate(domain.predicates)}
    props = sorted(atoms, key=lambda a: (pred_order[a.predicate], [order[x] for x in a.args]))
    index = {a: i for i, a in enumerate(props)}

    actions = []
    for si, combo, binding in raw_actions:
        schema = domain.schemas[si]
        outcomes = tuple(
            GroundOutcome(e.probability,
                          tuple(index[_bind(a, binding)] for a in e.add),
                          tuple(index[_bind(a, binding)] for a in e.delete))
            for e in schema.effects
        )
        actions.append(GroundAction(
            schema=si,
            args=combo,
            pre=tuple(dict.fromkeys(index[_bind(a, binding)] for a in schema.precondition)),
            outcomes=outcomes,
            cost=float(schema.cost),
            related=tuple(index[_bind(t, binding)] for t in templates[si]),
            name=f"({' '.join((schema.name,) + combo)})",
        ))

    schema_ranges = _ranges([a.schema for a in actions], len(domain.schemas))
    pred_ranges = _ranges([pred_order[p.predicate] for p in props], len(domain.predicates))
    return GroundTask(
        domain=domain,
        problem=problem,
        props=props,
        actions=actions,
        init=_mask(index[a] for a in problem.init),
        goal=tuple(index[a] for a in problem.goal),
        schema_ranges=schema_ranges,
        pred_ranges=pred_ranges,
        prop_index=index,
    )


def _bind(atom: Atom, binding: dict[str, str]) -> Atom:
    return Atom(atom.predicate, tuple(binding.get(x, x) for x in atom.args))


def _equalities_hold(schema: ActionSchema, binding: dict[str, str]) -> bool:
    for eq in schema.equalities:
        same = binding.get(eq.lhs, eq.lhs) == binding.get(eq.rhs, eq.rhs)
        if same != eq.positive:
            return False
    return True


def _ranges(keys: list[int], n: int) -> list[tuple[int, int]]:
    out = []
    pos = 0
    for k in range(n):
        start = pos
        while pos < len(keys) and keys[pos] == k:
            pos += 1
        out.append((start, pos))
    return out


# ---------------------------------------------------------------------------
# network wiring


@dataclass
class NetworkSpec:
    """Connectivity of one ASNet instantiated on one ground task.

    ``rel[s]`` is an ``(n_s, M_s)`` array of proposition indices feeding each
    action of schema ``s``; ``pool[f][k]`` is an ``(n_f, K)`` array of action
    indices pooled into slot ``k`` of every proposition of predicate ``f``,
    padded with ``n_actions`` (the "no input" sentinel).
    """
    n_layers: int
    hidden_size: int
    n_props: int
    n_actions: int
    schema_names: list[str]
    schema_ranges: list[tuple[int, int]]
    schema_M: list[int]
    rel: list[np.ndarray]
    pred_names: list[str]
    pred_ranges: list[tuple[int, int]]
    pred_slots: list[tuple[int, ...]]
    pool: list[list[np.ndarray]]
    goal_rel: list[np.ndarray]

    @property
    def layers(self) -> list[str]:
        return ["act", "prop"] * self.n_layers + ["act"]

    def feature_dim(self, s: int) -> int:
        return 2 * self.schema_M[s] + 3

    def param_shapes(self) -> dict[tuple[int, str, str], tuple[int, int]]:
        """Weight-matrix shape per key ``(layer, kind, name)``; biases are ``(rows,)``."""
        n, dh = self.n_layers, self.hidden_size
        shapes = {}
        for l in range(1, n + 2):
            for s, name in enumerate(self.schema_names):
                d_in = self.feature_dim(s) if l == 1 else dh * self.schema_M[s]
                d_out = 1 if l == n + 1 else dh
                shapes[(l, "act", name)] = (d_out, d_in)
        for l in range(1, n + 1):
            for f, name in enumerate(self.pred_names):
                shapes[(l, "prop", name)] = (dh, dh * len(self.pred_slots[f]))
        return shapes


def build_network_spec(task: GroundTask, n_layers: int = 2, hidden_size: int = 16) -> NetworkSpec:
    domain = task.domain
    slots = predicate_slots(domain)
    rel, goal_rel, schema_M = [], [], []
    goal = np.zeros(task.n_props, dtype=bool)
    goal[list(task.goal)] = True
    for s, schema in enumerate(domain.schemas):
        M = len(schema_templates(schema))
        lo, hi = task.schema_ranges[s]
        arr = np.array([task.actions[a].related for a in range(lo, hi)], dtype=np.intp)
        arr = arr.reshape(hi - lo, M)
        rel.append(arr)
        goal_rel.append(goal[arr])
        schema_M.append(M)

    # contributing actions per (prop, schema)
    contrib: dict[tuple[int, int], list[int]] = {}
    for a, act in enumerate(task.actions):
        for p in dict.fromkeys(act.related):
            contrib.setdefault((p, act.schema), []).append(a)

    pool = []
    pred_slots = []
    for f, pred in enumerate(domain.predicates):
        lo, hi = task.pred_ranges[f]
        f_slots = slots[pred.name]
        pred_slots.append(f_slots)
        per_slot = []
        for s in f_slots:
            lists = [contrib.get((p, s), []) for p in range(lo, hi)]
            width = max((len(x) for x in lists), default=0)
            arr = np.full((hi - lo, max(width, 1)), task.n_actions, dtype=np.intp)
            for i, x in enumerate(lists):
                arr[i, : len(x)] = sorted(x)
            per_slot.append(arr)
        pool.append(per_slot)

    return NetworkSpec(
        n_layers=n_layers,
        hidden_size=hidden_size,
        n_props=task.n_props,
        n_actions=task.n_actions,
        schema_names=[s.name for s in domain.schemas],
        schema_ranges=list(task.schema_ranges),
        schema_M=schema_M,
        rel=rel,
        pred_names=[p.name for p in domain.predicates],
        pred_ranges=list(task.pred_ranges),
        pred_slots=pred_slots,
        pool=pool,
        goal_rel=goal_rel,
    )


def dump_task(task: GroundTask, spec: NetworkSpec | None = None) -> dict:
    """JSON-serialisable description used by ``asnet ground --dump json``."""
    out = {
        "problem": task.problem.name,
        "domain": task.domain.name,
        "props": [task.prop_name(p) for p in range(task.n_props)],
        "actions": [
            {
                "name": act.name,
                "schema": task.domain.schemas[act.schema].name,
                "pre": list(act.pre),
                "outcomes": [
                    {"probability": str(o.probability), "add": list(o.add), "delete": list(o.delete)}
                    for o in act.outcomes
                ],
                "cost": act.cost,
                "related": list(act.related),
            }
            for act in task.actions
        ],
        "init": [p for p in range(task.n_props) if task.init >> p & 1],
        "goal": list(task.goal),
    }
    if spec is not None:
        out["network"] = {
            "n_layers": spec.n_layers,
            "hidden_size": spec.hidden_size,
            "layers": spec.layers,
            "schemas": {n: {"M": m, "input_dim": spec.feature_dim(s)}
                        for s, (n, m) in enumerate(zip(spec.schema_names, spec.schema_M))},
            "predicates": {n: {"L": len(sl), "slots": [spec.schema_names[x] for x in sl]}
                           for n, sl in zip(spec.pred_names, spec.pred_slots)},
            "param_shapes": {f"{l}/{k}/{n}": list(v)
                             for (l, k, n), v in spec.param_shapes().items()},
        }
    return out
