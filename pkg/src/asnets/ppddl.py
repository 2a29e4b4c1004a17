"""Reader and writer for the STRIPS + probabilistic-effects subset of PPDDL.

The accepted dialect is the IPC one: typed objects, conjunctive positive
preconditions (plus optional ``=`` tests between parameters), and effects
built from ``and``, ``not`` and ``probabilistic``.  Effects are normalised at
parse time into a flat outcome list, each outcome being an exact rational
probability with an add-list and a delete-list.

Everything is lower-cased on input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import PPDDLSyntaxError, SemanticsError, UnsupportedFeature

SUPPORTED_REQUIREMENTS = (":strips", ":typing", ":probabilistic-effects", ":equality")

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return f"({self.predicate})"
        return f"({self.predicate} {' '.join(self.args)})"


@dataclass(frozen=True)
class TypedName:
    name: str
    type: str = "object"


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    params: tuple[TypedName, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Effect:
    """One outcome of a probabilistic action."""
    probability: Fraction
    add: tuple[Atom, ...] = ()
    delete: tuple[Atom, ...] = ()


@dataclass(frozen=True)
class Equality:
    lhs: str
    rhs: str
    positive: bool = True


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[TypedName, ...]
    precondition: tuple[Atom, ...]
    effects: tuple[Effect, ...]
    cost: Fraction = Fraction(1)
    equalities: tuple[Equality, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: tuple[str, ...] = ()
    types: tuple[tuple[str, str], ...] = ()
    constants: tuple[TypedName, ...] = ()
    predicates: tuple[PredicateDecl, ...] = ()
    schemas: tuple[ActionSchema, ...] = ()

    def predicate(self, name: str) -> PredicateDecl:
        for p in self.predicates:
            if p.name == name:
                return p
        raise KeyError(name)

    def schema(self, name: str) -> ActionSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise KeyError(name)

    def type_parents(self) -> dict[str, str]:
        return dict(self.types)

    def is_subtype(self, sub: str, sup: str) -> bool:
        parents = self.type_parents()
        seen = set()
        while sub not in seen:
            if sub == sup:
                return True
            seen.add(sub)
            if sub not in parents:
                break
            sub = parents[sub]
        return sup == "object"


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: tuple[TypedName, ...] = ()
    init: tuple[Atom, ...] = ()
    goal: tuple[Atom, ...] = ()


# ---------------------------------------------------------------------------
# s-expressions


@dataclass
class Token:
    text: str
    line: int
    col: int


@dataclass
class SList:
    items: list = field(default_factory=list)
    line: int = 0
    col: int = 0

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Token):
            return self.items[0].text
        return None


def _tokenize(text: str, filename: str | None) -> Iterator[Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield Token(ch, line, col)
            i += 1
            col += 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield Token(text[i:j].lower(), line, col)
            col += j - i
            i = j


def parse_sexpr(text: str, filename: str | None = None) -> SList:
    """Parse exactly one top-level s-expression."""
    stack: list[SList] = []
    result: SList | None = None
    for tok in _tokenize(text, filename):
        if result is not None:
            raise PPDDLSyntaxError("trailing input after expression", tok.line, tok.col, filename)
        if tok.text == "(":
            stack.append(SList([], tok.line, tok.col))
        elif tok.text == ")":
            if not stack:
                raise PPDDLSyntaxError("unbalanced ')'", tok.line, tok.col, filename)
            done = stack.pop()
            if stack:
                stack[-1].items.append(done)
            else:
                result = done
        else:
            if not stack:
                raise PPDDLSyntaxError(f"unexpected token {tok.text!r} outside expression",
                                       tok.line, tok.col, filename)
            stack[-1].items.append(tok)
    if stack:
        raise PPDDLSyntaxError("unexpected end of input (unclosed '(')",
                               stack[-1].line, stack[-1].col, filename)
    if result is None:
        raise PPDDLSyntaxError("empty input", 1, 1, filename)
    return result


# ---------------------------------------------------------------------------
# parsing helpers


class _Reader:
    def __init__(self, filename: str | None):
        self.filename = filename

    def syntax(self, msg: str, node) -> PPDDLSyntaxError:
        return PPDDLSyntaxError(msg, node.line, node.col, self.filename)

    def semantics(self, msg: str, node=None) -> SemanticsError:
        if node is None:
            return SemanticsError(msg, filename=self.filename)
        return SemanticsError(msg, node.line, node.col, self.filename)

    def unsupported(self, msg: str, node) -> UnsupportedFeature:
        return UnsupportedFeature(msg, node.line, node.col, self.filename)

    def expect_list(self, node, what: str) -> SList:
        if not isinstance(node, SList):
            raise self.syntax(f"expected {what}, got {node.text!r}", node)
        return node

    def expect_token(self, node, what: str) -> str:
        if not isinstance(node, Token):
            raise self.syntax(f"expected {what}, got a list", node)
        return node.text

    def typed_list(self, items: Sequence, variables: bool) -> list[TypedName]:
        out: list[TypedName] = []
        pending: list[Token] = []
        i = 0
        while i < len(items):
            node = items[i]
            text = self.expect_token(node, "name")
            if text == "-":
                if i + 1 >= len(items) or not pending:
                    raise self.syntax("dangling '-' in typed list", node)
                tnode = items[i + 1]
                if isinstance(tnode, SList):
                    if tnode.head() == "either":
                        raise self.unsupported("'either' types are not supported", tnode)
                    raise self.syntax("expected type name", tnode)
                out.extend(TypedName(t.text, tnode.text) for t in pending)
                pending = []
                i += 2
                continue
            if variables and not text.startswith("?"):
                raise self.syntax(f"expected variable, got {text!r}", node)
            if not variables and text.startswith("?"):
                raise self.syntax(f"unexpected variable {text!r}", node)
            pending.append(node)
            i += 1
        out.extend(TypedName(t.text, "object") for t in pending)
        return out

    def atom(self, node) -> Atom:
        lst = self.expect_list(node, "atom")
        if not lst.items:
            raise self.syntax("empty atom", lst)
        name = self.expect_token(lst.items[0], "predicate name")
        args = tuple(self.expect_token(a, "term") for a in lst.items[1:])
        return Atom(name, args)

    def conjunction(self, node, allow_equality: bool):
        """Flatten a positive conjunction into (atoms, equalities)."""
        atoms: list[Atom] = []
        eqs: list[Equality] = []

        def visit(n, positive=True):
            lst = self.expect_list(n, "condition")
            head = lst.head()
            if head is None:
                if lst.items:
                    raise self.syntax("malformed condition", lst)
                return
            if head == "and":
                if not positive:
                    raise self.unsupported("negated conjunctions are not supported", lst)
                for child in lst.items[1:]:
                    visit(child)
            elif head == "not":
                if len(lst.items) != 2:
                    raise self.syntax("'not' takes exactly one argument", lst)
                inner = self.expect_list(lst.items[1], "condition")
                if inner.head() == "=" and allow_equality and positive:
                    visit(inner, positive=False)
                else:
                    raise self.unsupported("negative conditions are not supported", lst)
            elif head == "=":
                if not allow_equality:
                    raise self.unsupported("equality is only allowed in preconditions", lst)
                if len(lst.items) != 3:
                    raise self.syntax("'=' takes exactly two arguments", lst)
                eqs.append(Equality(self.expect_token(lst.items[1], "term"),
                                    self.expect_token(lst.items[2], "term"), positive))
            elif head in ("or", "imply", "exists", "forall", "when"):
                raise self.unsupported(f"'{head}' is not supported", lst)
            else:
                atoms.append(self.atom(lst))

        visit(node)
        return _dedup(atoms), tuple(eqs)

    def effect(self, node) -> list[tuple[Fraction, list[Atom], list[Atom]]]:
        """Normalise an effect expression into a list of outcomes."""
        lst = self.expect_list(node, "effect")
        head = lst.head()
        if head is None:
            if lst.items:
                raise self.syntax("malformed effect", lst)
            return [(Fraction(1), [], [])]
        if head == "and":
            dist = [(Fraction(1), [], [])]
            for child in lst.items[1:]:
                sub = self.effect(child)
                dist = [(p * q, a1 + a2, d1 + d2) for p, a1, d1 in dist for q, a2, d2 in sub]
            return dist
        if head == "not":
            if len(lst.items) != 2:
                raise self.syntax("'not' takes exactly one argument", lst)
            return [(Fraction(1), [], [self.atom(lst.items[1])])]
        if head == "probabilistic":
            body = lst.items[1:]
            if not body or len(body) % 2:
                raise self.syntax("'probabilistic' needs probability/effect pairs", lst)
            dist = []
            total = Fraction(0)
            for k in range(0, len(body), 2):
                ptext = self.expect_token(body[k], "probability")
                try:
                    p = Fraction(ptext)
                except (ValueError, ZeroDivisionError):
                    raise self.syntax(f"bad probability {ptext!r}", body[k]) from None
                if not (0 < p <= 1):
                    raise self.semantics(f"probability {ptext} outside (0, 1]", body[k])
                total += p
                dist.extend((p * q, a, d) for q, a, d in self.effect(body[k + 1]))
            if total > 1:
                raise self.semantics(f"probabilities sum to {total} > 1", lst)
            if total < 1:
                if len(body) > 2:
                    raise self.semantics(f"probabilities sum to {total}, expected 1", lst)
                # single-branch shorthand: remaining mass is a no-op
                dist.append((1 - total, [], []))
            return dist
        if head in ("when", "forall", "increase", "decrease", "assign"):
            raise self.unsupported(f"'{head}' effects are not supported", lst)
        return [(Fraction(1), [self.atom(lst)], [])]


def _dedup(items: Iterable) -> tuple:
    seen = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return tuple(out)


def _sections(r: _Reader, root: SList, kind: str):
    if root.head() != "define" or len(root.items) < 2:
        raise r.syntax("expected (define ...)", root)
    header = r.expect_list(root.items[1], f"({kind} name)")
    if header.head() != kind or len(header.items) != 2:
        raise r.syntax(f"expected ({kind} <name>)", header)
    name = r.expect_token(header.items[1], "name")
    sections = []
    for node in root.items[2:]:
        sec = r.expect_list(node, "section")
        head = sec.head()
        if head is None or not head.startswith(":"):
            raise r.syntax("expected a ':section'", sec)
        sections.append((head, sec))
    return name, sections


# ---------------------------------------------------------------------------
# domain


def parse_domain(text: str, filename: str | None = None) -> Domain:
    """Parse domain text into a validated :class:`Domain`."""
    try:
        return _parse_domain(text, filename)
    except RecursionError:
        raise PPDDLSyntaxError("expression nested too deeply", filename=filename) from None


def _parse_domain(text: str, filename: str | None) -> Domain:
    r = _Reader(filename)
    root = parse_sexpr(text, filename)
    name, sections = _sections(r, root, "domain")

    requirements: list[str] = []
    types: list[tuple[str, str]] = []
    constants: list[TypedName] = []
    predicates: list[PredicateDecl] = []
    schemas: list[ActionSchema] = []
    for head, sec in sections:
        if head == ":requirements":
            for tok in sec.items[1:]:
                req = r.expect_token(tok, "requirement")
                if req not in SUPPORTED_REQUIREMENTS:
                    raise r.unsupported(f"requirement {req} is not supported", tok)
                requirements.append(req)
        elif head == ":types":
            types.extend((t.name, t.type) for t in r.typed_list(sec.items[1:], variables=False))
        elif head == ":constants":
            constants.extend(r.typed_list(sec.items[1:], variables=False))
        elif head == ":predicates":
            for node in sec.items[1:]:
                lst = r.expect_list(node, "predicate declaration")
                if not lst.items:
                    raise r.syntax("empty predicate declaration", lst)
                pname = r.expect_token(lst.items[0], "predicate name")
                params = r.typed_list(lst.items[1:], variables=True)
                if any(p.name == pname for p in predicates):
                    raise r.semantics(f"duplicate predicate {pname}", lst)
                predicates.append(PredicateDecl(pname, tuple(params)))
        elif head == ":action":
            schema = _parse_action(r, sec)
            if any(s.name == schema.name for s in schemas):
                raise r.semantics(f"duplicate action schema {schema.name}", sec)
            schemas.append(schema)
        else:
            raise r.unsupported(f"domain section {head} is not supported", sec)

    domain = Domain(name, tuple(requirements), tuple(types), tuple(constants),
                    tuple(predicates), tuple(schemas))
    _check_domain(r, domain)
    return domain


def _parse_action(r: _Reader, sec: SList) -> ActionSchema:
    if len(sec.items) < 2:
        raise r.syntax("action without a name", sec)
    name = r.expect_token(sec.items[1], "action name")
    params: list[TypedName] = []
    pre: tuple[Atom, ...] = ()
    eqs: tuple[Equality, ...] = ()
    outcomes = [(Fraction(1), [], [])]
    cost = Fraction(1)
    items = sec.items[2:]
    i = 0
    while i < len(items):
        node = items[i]
        if isinstance(node, SList):
            if node.head() == ":action-cost" and len(node.items) == 2:
                ctext = r.expect_token(node.items[1], "cost")
                try:
                    cost = Fraction(ctext)
                except (ValueError, ZeroDivisionError):
                    raise r.syntax(f"bad cost {ctext!r}", node) from None
                if cost <= 0:
                    raise r.semantics("action cost must be positive", node)
                i += 1
                continue
            raise r.syntax("expected an action keyword", node)
        key = node.text
        if i + 1 >= len(items):
            raise r.syntax(f"missing value for {key}", node)
        value = items[i + 1]
        if key == ":parameters":
            params = r.typed_list(r.expect_list(value, "parameter list").items, variables=True)
        elif key == ":precondition":
            pre, eqs = r.conjunction(value, allow_equality=True)
        elif key == ":effect":
            outcomes = r.effect(value)
        else:
            raise r.unsupported(f"action keyword {key} is not supported", node)
        i += 2

    effects = []
    for p, adds, dels in outcomes:
        adds, dels = _dedup(adds), _dedup(dels)
        clash = set(adds) & set(dels)
        if clash:
            raise r.semantics(f"action {name}: {min(map(str, clash))} is both added and deleted",
                              sec)
        effects.append(Effect(p, adds, dels))
    if sum(e.probability for e in effects) != 1:
        raise r.semantics(f"action {name}: outcome probabilities do not sum to 1", sec)
    return ActionSchema(name, tuple(params), pre, tuple(effects), cost, eqs)


def _check_domain(r: _Reader, d: Domain) -> None:
    declared_types = {"object"} | {t for t, _ in d.types} | {p for _, p in d.types}
    for c in d.constants:
        if c.type not in declared_types:
            raise r.semantics(f"constant {c.name} has unknown type {c.type}")
    for p in d.predicates:
        for prm in p.params:
            if prm.type not in declared_types:
                raise r.semantics(f"predicate {p.name}: unknown type {prm.type}")
    preds = {p.name: p for p in d.predicates}
    consts = {c.name: c.type for c in d.constants}
    for s in d.schemas:
        names = [p.name for p in s.params]
        if len(set(names)) != len(names):
            raise r.semantics(f"action {s.name}: duplicate parameter")
        scope = {p.name: p.type for p in s.params}
        for prm in s.params:
            if prm.type not in declared_types:
                raise r.semantics(f"action {s.name}: unknown type {prm.type}")

        def term_type(term: str) -> str:
            if term.startswith("?"):
                if term not in scope:
                    raise r.semantics(f"action {s.name}: undeclared parameter {term}")
                return scope[term]
            if term not in consts:
                raise r.semantics(f"action {s.name}: unknown constant {term}")
            return consts[term]

        atoms = list(s.precondition)
        for e in s.effects:
            atoms.extend(e.add)
            atoms.extend(e.delete)
        for a in atoms:
            if a.predicate not in preds:
                raise r.semantics(f"action {s.name}: unknown predicate {a.predicate}")
            decl = preds[a.predicate]
            if len(a.args) != decl.arity:
                raise r.semantics(f"action {s.name}: {a.predicate} expects {decl.arity} "
                                  f"arguments, got {len(a.args)}")
            for term, prm in zip(a.args, decl.params):
                t = term_type(term)
                if not (d.is_subtype(t, prm.type) or d.is_subtype(prm.type, t)):
                    raise r.semantics(f"action {s.name}: {term} of type {t} does not fit "
                                      f"{a.predicate} argument of type {prm.type}")
        for eq in s.equalities:
            term_type(eq.lhs)
            term_type(eq.rhs)


# ---------------------------------------------------------------------------
# problem


def parse_problem(text: str, domain: Domain, filename: str | None = None) -> Problem:
    """Parse problem text and cross-validate it against ``domain``."""
    try:
        return _parse_problem(text, domain, filename)
    except RecursionError:
        raise PPDDLSyntaxError("expression nested too deeply", filename=filename) from None


def _parse_problem(text: str, domain: Domain, filename: str | None) -> Problem:
    r = _Reader(filename)
    root = parse_sexpr(text, filename)
    name, sections = _sections(r, root, "problem")
    domain_name = None
    objects: list[TypedName] = []
    init: list[Atom] = []
    goal: tuple[Atom, ...] = ()
    for head, sec in sections:
        if head == ":domain":
            if len(sec.items) != 2:
                raise r.syntax("expected (:domain <name>)", sec)
            domain_name = r.expect_token(sec.items[1], "domain name")
            if domain_name != domain.name:
                raise r.semantics(f"problem is for domain {domain_name}, not {domain.name}", sec)
        elif head == ":objects":
            objects.extend(r.typed_list(sec.items[1:], variables=False))
        elif head == ":init":
            for node in sec.items[1:]:
                lst = r.expect_list(node, "initial fact")
                if lst.head() in ("not", "=", "probabilistic"):
                    raise r.unsupported(f"'{lst.head()}' in :init is not supported", lst)
                init.append(r.atom(lst))
        elif head == ":goal":
            if len(sec.items) != 2:
                raise r.syntax("expected (:goal <condition>)", sec)
            goal, eqs = r.conjunction(sec.items[1], allow_equality=False)
        else:
            raise r.unsupported(f"problem section {head} is not supported", sec)
    if domain_name is None:
        raise r.semantics("problem does not name its domain", root)

    problem = Problem(name, domain_name, tuple(objects), _dedup(init), goal)
    _check_problem(r, problem, domain)
    return problem


def _check_problem(r: _Reader, p: Problem, d: Domain) -> None:
    declared_types = {"object"} | {t for t, _ in d.types} | {q for _, q in d.types}
    typ: dict[str, str] = {c.name: c.type for c in d.constants}
    for o in p.objects:
        if o.type not in declared_types:
            raise r.semantics(f"object {o.name} has unknown type {o.type}")
        if o.name in typ:
            raise r.semantics(f"object {o.name} declared twice")
        typ[o.name] = o.type
    preds = {q.name: q for q in d.predicates}
    for where, atoms in (("init", p.init), ("goal", p.goal)):
        for a in atoms:
            if a.predicate not in preds:
                raise r.semantics(f"{where}: unknown predicate {a.predicate}")
            decl = preds[a.predicate]
            if len(a.args) != decl.arity:
                raise r.semantics(f"{where}: {a} has wrong arity (expected {decl.arity})")
            for arg, prm in zip(a.args, decl.params):
                if arg not in typ:
                    raise r.semantics(f"{where}: {a} uses undeclared object {arg}")
                if not d.is_subtype(typ[arg], prm.type):
                    raise r.semantics(f"{where}: {arg} is not of type {prm.type} in {a}")


# ---------------------------------------------------------------------------
# printing


def format_fraction(p: Fraction) -> str:
    den = p.denominator
    while den % 2 == 0:
        den //= 2
    while den % 5 == 0:
        den //= 5
    if den != 1:
        return f"{p.numerator}/{p.denominator}"
    s = format(Decimal(p.numerator) / Decimal(p.denominator), "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def _typed(names: Sequence[TypedName]) -> str:
    parts: list[str] = []
    k = 0
    while k < len(names):
        j = k
        while j < len(names) and names[j].type == names[k].type:
            j += 1
        parts.extend(n.name for n in names[k:j])
        parts.extend(("-", names[k].type))
        k = j
    return " ".join(parts)


def _outcome(e: Effect) -> str:
    lits = [str(a) for a in e.add] + [f"(not {a})" for a in e.delete]
    return f"(and {' '.join(lits)})" if lits else "(and)"


def print_domain(d: Domain) -> str:
    out = [f"(define (domain {d.name})"]
    if d.requirements:
        out.append(f"  (:requirements {' '.join(d.requirements)})")
    if d.types:
        out.append(f"  (:types {_typed([TypedName(t, p) for t, p in d.types])})")
    if d.constants:
        out.append(f"  (:constants {_typed(d.constants)})")
    out.append("  (:predicates")
    for p in d.predicates:
        sig = f" {_typed(p.params)}" if p.params else ""
        out.append(f"    ({p.name}{sig})")
    out.append("  )")
    for s in d.schemas:
        out.append(f"  (:action {s.name}")
        out.append(f"    :parameters ({_typed(s.params)})")
        conds = [str(a) for a in s.precondition]
        for eq in s.equalities:
            test = f"(= {eq.lhs} {eq.rhs})"
            conds.append(test if eq.positive else f"(not {test})")
        out.append(f"    :precondition (and {' '.join(conds)})" if conds
                   else "    :precondition (and)")
        if len(s.effects) == 1 and s.effects[0].probability == 1:
            out.append(f"    :effect {_outcome(s.effects[0])}")
        else:
            branches = " ".join(f"{format_fraction(e.probability)} {_outcome(e)}"
                                for e in s.effects)
            out.append(f"    :effect (probabilistic {branches})")
        if s.cost != 1:
            out.append(f"    (:action-cost {format_fraction(s.cost)})")
        out.append("  )")
    out.append(")")
    return "\n".join(out) + "\n"


def print_problem(p: Problem) -> str:
    out = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    if p.objects:
        out.append(f"  (:objects {_typed(p.objects)})")
    out.append("  (:init")
    out.extend(f"    {a}" for a in p.init)
    out.append("  )")
    out.append(f"  (:goal (and {' '.join(str(a) for a in p.goal)}))")
    out.append(")")
    return "\n".join(out) + "\n"


def read_domain(path) -> Domain:
    with open(path, encoding="utf-8") as fh:
        return parse_domain(fh.read(), str(path))


def read_problem(path, domain: Domain) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read(), domain, str(path))
