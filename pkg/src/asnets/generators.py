"""PPDDL generators for the benchmark domains.

Each generator returns ``(domain_text, problem_text)`` and is deterministic
in its arguments.  Encoding notes:

Triangle Tire World
    Locations ``l-r-c`` form a triangle with side ``2n+1`` (so ``(n+1)(2n+1)``
    locations).  Roads go up, diagonally down-right, and along even rows.
    The car starts at one bottom corner and must reach the other.  Spare
    tyres sit only on the left edge and the hypotenuse, so the long way
    round is the only route that cannot strand the car.  Every move flattens
    the tyre with probability 0.5; a flat is fixed by ``changetire`` at a
    location that still has a spare.

CosaNostra Pizza
    A chain ``shop - booth-1 - ... - booth-n - customer``.  At a booth the
    deliverator either pays (one step) or drives through, which angers the
    operator; leaving an angry operator's booth later crushes the car with
    probability 0.5.  Loading and unloading the pizza are explicit actions,
    which gives an optimal cost of ``3n + 4``.

Probabilistic Blocks World
    The usual four operators; pick-ups and stacking fail with probability
    0.25 and the block lands on the table.  Initial and goal configurations
    are drawn by shuffling the blocks and cutting the sequence into towers
    (each block starts a new tower with probability 1/2).

Monster
    Two one-way paths of ``n`` moves lead from ``start`` to an exit location
    ``a-n`` / ``b-n``, each connected to ``goal``.  The first (forced) action
    places the monster at one of the two exits with equal probability;
    leaving the exit that hosts the monster kills the agent with probability
    0.99.  Both paths look identical to the all-outcomes determinisation.
"""

from __future__ import annotations

import numpy as np

TTW_DOMAIN = """\
(define (domain triangle-tire)
  (:requirements :typing :strips :probabilistic-effects)
  (:types location)
  (:predicates
    (vehicle-at ?loc - location)
    (spare-in ?loc - location)
    (road ?from - location ?to - location)
    (not-flattire))
  (:action move-car
    :parameters (?from - location ?to - location)
    :precondition (and (vehicle-at ?from) (road ?from ?to) (not-flattire))
    :effect (and (vehicle-at ?to) (not (vehicle-at ?from))
                 (probabilistic 0.5 (not (not-flattire)))))
  (:action changetire
    :parameters (?loc - location)
    :precondition (and (vehicle-at ?loc) (spare-in ?loc))
    :effect (and (not (spare-in ?loc)) (not-flattire))))
"""

COSANOSTRA_DOMAIN = """\
(define (domain cosanostra)
  (:requirements :typing :strips :probabilistic-effects)
  (:types toll-booth open-intersection - location)
  (:predicates
    (road ?from - location ?to - location)
    (deliverator-at ?l - location)
    (pizza-at ?l - location)
    (carrying-pizza)
    (operator-calm ?b - toll-booth)
    (operator-paid ?b - toll-booth)
    (operator-angry ?b - toll-booth))
  (:action load-pizza
    :parameters (?l - location)
    :precondition (and (deliverator-at ?l) (pizza-at ?l))
    :effect (and (carrying-pizza) (not (pizza-at ?l))))
  (:action unload-pizza
    :parameters (?l - location)
    :precondition (and (deliverator-at ?l) (carrying-pizza))
    :effect (and (pizza-at ?l) (not (carrying-pizza))))
  (:action pay-operator
    :parameters (?b - toll-booth)
    :precondition (and (deliverator-at ?b) (operator-calm ?b))
    :effect (and (operator-paid ?b) (not (operator-calm ?b))))
  (:action drive
    :parameters (?from - open-intersection ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to))
    :effect (and (deliverator-at ?to) (not (deliverator-at ?from))))
  (:action leave-paid-booth
    :parameters (?from - toll-booth ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to) (operator-paid ?from))
    :effect (and (deliverator-at ?to) (not (deliverator-at ?from))))
  (:action drive-through-booth
    :parameters (?from - toll-booth ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to) (operator-calm ?from))
    :effect (and (deliverator-at ?to) (not (deliverator-at ?from))
                 (operator-angry ?from) (not (operator-calm ?from))))
  (:action leave-angry-booth
    :parameters (?from - toll-booth ?to - location)
    :precondition (and (deliverator-at ?from) (road ?from ?to) (operator-angry ?from))
    :effect (probabilistic
              0.5 (and (deliverator-at ?to) (not (deliverator-at ?from)))
              0.5 (and (not (deliverator-at ?from))))))
"""

PBW_DOMAIN = """\
(define (domain prob-blocksworld)
  (:requirements :typing :strips :equality :probabilistic-effects)
  (:types block)
  (:predicates
    (on ?b - block ?c - block)
    (on-table ?b - block)
    (clear ?b - block)
    (holding ?b - block)
    (emptyhand))
  (:action pick-up
    :parameters (?b - block ?c - block)
    :precondition (and (emptyhand) (clear ?b) (on ?b ?c) (not (= ?b ?c)))
    :effect (probabilistic
              0.75 (and (holding ?b) (clear ?c) (not (emptyhand)) (not (clear ?b)) (not (on ?b ?c)))
              0.25 (and (on-table ?b) (clear ?c) (not (on ?b ?c)))))
  (:action pick-up-from-table
    :parameters (?b - block)
    :precondition (and (emptyhand) (clear ?b) (on-table ?b))
    :effect (probabilistic
              0.75 (and (holding ?b) (not (emptyhand)) (not (clear ?b)) (not (on-table ?b)))))
  (:action put-on-block
    :parameters (?b - block ?c - block)
    :precondition (and (holding ?b) (clear ?c) (not (= ?b ?c)))
    :effect (probabilistic
              0.75 (and (on ?b ?c) (emptyhand) (clear ?b) (not (holding ?b)) (not (clear ?c)))
              0.25 (and (on-table ?b) (emptyhand) (clear ?b) (not (holding ?b)))))
  (:action put-down
    :parameters (?b - block)
    :precondition (holding ?b)
    :effect (and (on-table ?b) (emptyhand) (clear ?b) (not (holding ?b)))))
"""

MONSTER_DOMAIN = """\
(define (domain monster)
  (:requirements :typing :strips :probabilistic-effects)
  (:types location)
  (:predicates
    (at ?l - location)
    (road ?from - location ?to - location)
    (exit ?from - location ?to - location)
    (monster-at ?l - location)
    (no-monster ?l - location)
    (spawn-pair ?x - location ?y - location)
    (unplaced)
    (placed))
  (:action spawn-monster
    :parameters (?x - location ?y - location)
    :precondition (and (unplaced) (spawn-pair ?x ?y))
    :effect (and (placed) (not (unplaced))
                 (probabilistic
                   0.5 (and (monster-at ?x) (no-monster ?y))
                   0.5 (and (monster-at ?y) (no-monster ?x)))))
  (:action move
    :parameters (?from - location ?to - location)
    :precondition (and (placed) (at ?from) (road ?from ?to))
    :effect (and (at ?to) (not (at ?from))))
  (:action leave-safe
    :parameters (?from - location ?to - location)
    :precondition (and (at ?from) (exit ?from ?to) (no-monster ?from))
    :effect (and (at ?to) (not (at ?from))))
  (:action leave-monster
    :parameters (?from - location ?to - location)
    :precondition (and (at ?from) (exit ?from ?to) (monster-at ?from))
    :effect (probabilistic
              0.99 (and (not (at ?from)))
              0.01 (and (at ?to) (not (at ?from))))))
"""

KINDS = ("ttw", "cosanostra", "pbw", "monster")


def _problem(name: str, domain: str, objects: list[tuple[list[str], str]],
             init: list[str], goal: list[str]) -> str:
    lines = [f"(define (problem {name})", f"  (:domain {domain})"]
    obj = " ".join(" ".join(names) + f" - {t}" for names, t in objects if names)
    lines.append(f"  (:objects {obj})")
    lines.append("  (:init")
    lines.extend(f"    {fact}" for fact in init)
    lines.append("  )")
    lines.append(f"  (:goal (and {' '.join(goal)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def ttw_locations(n: int) -> list[tuple[int, int]]:
    side = 2 * n + 1
    return [(r, c) for r in range(side) for c in range(side - r)]


def _loc(r: int, c: int) -> str:
    return f"l-{r + 1}-{c + 1}"


def ttw_roads(n: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    side = 2 * n + 1
    cells = set(ttw_locations(n))
    roads = []
    for r, c in ttw_locations(n):
        if r % 2 == 0 and (r, c + 1) in cells:
            roads.append(((r, c), (r, c + 1)))
        if (r + 1, c) in cells:
            roads.append(((r, c), (r + 1, c)))
        if r > 0 and (r - 1, c + 1) in cells:
            roads.append(((r, c), (r - 1, c + 1)))
    assert all(r + c < side for (r, c), _ in roads)
    return roads


def ttw_outer_edge(n: int) -> list[tuple[int, int]]:
    """Locations on the safe route, start to goal."""
    side = 2 * n + 1
    left = [(r, 0) for r in range(side)]
    hyp = [(r, side - 1 - r) for r in range(side - 2, -1, -1)]
    return left + hyp


def gen_ttw(n: int) -> tuple[str, str]:
    if n < 1:
        raise ValueError("size must be positive")
    locs = ttw_locations(n)
    spares = set(ttw_outer_edge(n)[1:-1])
    init = ["(vehicle-at l-1-1)", "(not-flattire)"]
    init += [f"(road {_loc(*a)} {_loc(*b)})" for a, b in ttw_roads(n)]
    init += [f"(spare-in {_loc(*x)})" for x in locs if x in spares]
    goal = [f"(vehicle-at {_loc(0, 2 * n)})"]
    problem = _problem(f"triangle-tire-{n}", "triangle-tire",
                       [([_loc(*x) for x in locs], "location")], init, goal)
    return TTW_DOMAIN, problem


def gen_cosanostra(n: int) -> tuple[str, str]:
    if n < 1:
        raise ValueError("size must be positive")
    booths = [f"booth-{i}" for i in range(1, n + 1)]
    chain = ["shop"] + booths + ["customer"]
    init = ["(deliverator-at shop)", "(pizza-at shop)"]
    for a, b in zip(chain, chain[1:]):
        init += [f"(road {a} {b})", f"(road {b} {a})"]
    init += [f"(operator-calm {b})" for b in booths]
    goal = ["(pizza-at customer)", "(deliverator-at shop)"]
    problem = _problem(f"cosanostra-n{n}", "cosanostra",
                       [(booths, "toll-booth"), (["shop", "customer"], "open-intersection")],
                       init, goal)
    return COSANOSTRA_DOMAIN, problem


def random_towers(blocks: list[str], rng: np.random.Generator) -> list[list[str]]:
    order = [blocks[i] for i in rng.permutation(len(blocks))]
    towers: list[list[str]] = []
    for b in order:
        if not towers or rng.random() < 0.5:
            towers.append([b])
        else:
            towers[-1].append(b)
    return towers


def _tower_facts(towers: list[list[str]]) -> list[str]:
    facts = []
    for tower in towers:
        facts.append(f"(on-table {tower[0]})")
        facts.extend(f"(on {top} {below})" for below, top in zip(tower, tower[1:]))
    return facts


def gen_pbw(n: int, seed: int = 0) -> tuple[str, str]:
    if n < 1:
        raise ValueError("size must be positive")
    rng = np.random.default_rng(np.random.SeedSequence([n, seed]))
    blocks = [f"b{i}" for i in range(1, n + 1)]
    init_towers = random_towers(blocks, rng)
    goal_towers = random_towers(blocks, rng)
    for _ in range(100):
        if sorted(map(tuple, goal_towers)) != sorted(map(tuple, init_towers)) or n == 1:
            break
        goal_towers = random_towers(blocks, rng)
    init = ["(emptyhand)"] + _tower_facts(init_towers)
    init += [f"(clear {t[-1]})" for t in init_towers]
    goal = _tower_facts(goal_towers)
    problem = _problem(f"pbw-n{n}-s{seed}", "prob-blocksworld", [(blocks, "block")], init, goal)
    return PBW_DOMAIN, problem


def gen_monster(n: int) -> tuple[str, str]:
    if n < 1:
        raise ValueError("path length must be positive")
    a = [f"a-{i}" for i in range(1, n + 1)]
    b = [f"b-{i}" for i in range(1, n + 1)]
    init = ["(at start)", "(unplaced)", f"(spawn-pair {a[-1]} {b[-1]})"]
    for path in (a, b):
        chain = ["start"] + path
        init += [f"(road {x} {y})" for x, y in zip(chain, chain[1:])]
        init.append(f"(exit {path[-1]} goal)")
    problem = _problem(f"monster-n{n}", "monster",
                       [(["start", "goal"] + a + b, "location")], init, ["(at goal)"])
    return MONSTER_DOMAIN, problem


def generate(kind: str, size: int, seed: int = 0) -> tuple[str, str]:
    if kind == "ttw":
        return gen_ttw(size)
    if kind == "cosanostra":
        return gen_cosanostra(size)
    if kind == "pbw":
        return gen_pbw(size, seed)
    if kind == "monster":
        return gen_monster(size)
    raise ValueError(f"unknown domain kind {kind!r}; expected one of {', '.join(KINDS)}")
