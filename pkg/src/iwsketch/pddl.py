"""Typed STRIPS PDDL: parsing, emission, grounding and unsatisfied-goal atoms.

The supported fragment is what the bundled domains need: positive
preconditions, add and delete effects, typing and constants.  Anything
else is rejected with ``UnsupportedFeature`` rather than silently ignored.

Grounding compiles static predicates away and produces a ``GroundedTask``
whose states are plain Python ints used as bitmasks over atom indices.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

Atom = tuple  # (predicate, arg1, arg2, ...)
State = int

DEFAULT_GROUNDING_CAP = 10**7

SUPPORTED_REQUIREMENTS = {":strips", ":typing", ":equality"}
UNSUPPORTED_KEYWORDS = {
    "not": "negative-preconditions",
    "or": "disjunctive-preconditions",
    "imply": "disjunctive-preconditions",
    "exists": "existential-preconditions",
    "forall": "universal-preconditions",
    "when": "conditional-effects",
    "=": "equality",
    "increase": "action-costs",
    "decrease": "numeric-fluents",
    "either": "either-types",
}


class PDDLError(Exception):
    pass


class PDDLSyntaxError(PDDLError):
    def __init__(self, message: str, line: int = 0, col: int = 0, token: str = ""):
        self.line, self.col, self.token = line, col, token
        where = f" at line {line}, column {col}" if line else ""
        near = f" near {token!r}" if token else ""
        super().__init__(f"{message}{where}{near}")


class UnsupportedFeature(PDDLError):
    def __init__(self, feature: str):
        self.feature = feature
        super().__init__(f"unsupported PDDL feature: {feature}")


class UnknownObjectType(PDDLError):
    pass


class UnknownObject(PDDLError):
    pass


class UnknownPredicate(PDDLError):
    pass


class ArityMismatch(PDDLError):
    pass


class TypeMismatch(PDDLError):
    pass


class GroundingExplosion(PDDLError):
    pass


# ---------------------------------------------------------------------------
# s-expressions

class Token(str):
    """A string that remembers where it came from."""

    line: int
    col: int

    def __new__(cls, text, line, col):
        tok = super().__new__(cls, text)
        tok.line = line
        tok.col = col
        return tok


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s()]+")


def tokenize(text: str) -> Iterator[Token]:
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        s = m.group(0)
        if s[0].isspace() or s[0] == ";":
            n = s.count("\n")
            if n:
                line += n
                line_start = m.start() + s.rfind("\n") + 1
            continue
        yield Token(s.lower(), line, m.start() - line_start + 1)


def parse_sexpr(text: str) -> SList:
    """Parse a single top-level s-expression."""
    stack: list[SList] = []
    result = None
    for tok in tokenize(text):
        if result is not None:
            raise PDDLSyntaxError("trailing input after expression", tok.line, tok.col, tok)
        if tok == "(":
            lst = SList()
            lst.line, lst.col = tok.line, tok.col
            stack.append(lst)
        elif tok == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", tok.line, tok.col, tok)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                result = done
        else:
            if not stack:
                raise PDDLSyntaxError("expected '('", tok.line, tok.col, tok)
            stack[-1].append(tok)
    if stack:
        raise PDDLSyntaxError("unexpected end of input, missing ')'", stack[-1].line, stack[-1].col)
    if result is None:
        raise PDDLSyntaxError("empty input")
    return result


def _where(x):
    return getattr(x, "line", 0), getattr(x, "col", 0)


def _err(msg, node, token=""):
    line, col = _where(node)
    return PDDLSyntaxError(msg, line, col, token or (node if isinstance(node, str) else ""))


def _expect_list(node, what):
    if not isinstance(node, list):
        raise _err(f"expected a list for {what}", node)
    return node


def _expect_name(node, what):
    if not isinstance(node, str):
        raise _err(f"expected a name for {what}", node)
    return str(node)


def parse_typed_list(items: Sequence, what: str) -> list[tuple[str, str]]:
    """``a b - t c`` -> [(a, t), (b, t), (c, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if isinstance(tok, list):
            if tok and tok[0] == "either":
                raise UnsupportedFeature("either-types")
            raise _err(f"unexpected list in {what}", tok)
        if tok == "-":
            if i + 1 >= len(items):
                raise _err(f"missing type after '-' in {what}", tok)
            typ = items[i + 1]
            if isinstance(typ, list):
                if typ and typ[0] == "either":
                    raise UnsupportedFeature("either-types")
                raise _err(f"bad type in {what}", typ)
            if not pending:
                raise _err(f"type without names in {what}", tok)
            out.extend((n, str(typ)) for n in pending)
            pending = []
            i += 2
            continue
        pending.append(str(tok))
        i += 1
    out.extend((n, "object") for n in pending)
    return out


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class Predicate:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: tuple[Atom, ...]
    add_effects: tuple[Atom, ...]
    del_effects: tuple[Atom, ...]


@dataclass(frozen=True)
class DomainModel:
    name: str
    requirements: tuple[str, ...]
    types: dict  # child -> parent; "object" is the root and maps to None
    constants: tuple[tuple[str, str], ...]
    predicates: tuple[Predicate, ...]
    schemas: tuple[ActionSchema, ...]

    def __hash__(self):
        return hash((self.name, self.predicates, self.schemas))

    @cached_property
    def predicate_map(self) -> dict[str, Predicate]:
        return {p.name: p for p in self.predicates}

    def is_subtype(self, t: str, of: str) -> bool:
        while t is not None:
            if t == of:
                return True
            t = self.types.get(t)
        return False


@dataclass(frozen=True)
class InstanceModel:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: tuple[Atom, ...]
    goal: tuple[Atom, ...]

    def __hash__(self):
        return hash((self.name, self.objects, self.init, self.goal))


def _section(items, key):
    for it in items:
        if isinstance(it, list) and it and it[0] == key:
            return it
    return None


def _parse_atom(node, what) -> Atom:
    node = _expect_list(node, what)
    if not node:
        raise _err(f"empty atom in {what}", node)
    head = node[0]
    if isinstance(head, list):
        raise _err(f"malformed atom in {what}", head)
    if head in UNSUPPORTED_KEYWORDS:
        raise UnsupportedFeature(UNSUPPORTED_KEYWORDS[head])
    for a in node[1:]:
        if isinstance(a, list):
            raise _err(f"nested term in {what}", a)
    return tuple(str(x) for x in node)


def _parse_conjunction(node, what) -> list[tuple[bool, Atom]]:
    """Flatten ``(and ...)`` into signed atoms. ``not`` is allowed by the
    caller only in effects."""
    if isinstance(node, list) and not node:
        return []
    node = _expect_list(node, what)
    head = node[0]
    if head == "and":
        out = []
        for sub in node[1:]:
            out.extend(_parse_conjunction(sub, what))
        return out
    if head == "not":
        if len(node) != 2:
            raise _err(f"malformed negation in {what}", node)
        return [(False, _parse_atom(node[1], what))]
    return [(True, _parse_atom(node, what))]


def parse_domain(text: str) -> DomainModel:
    root = parse_sexpr(text)
    if not root or root[0] != "define":
        raise _err("expected (define ...)", root)
    header = _expect_list(root[1] if len(root) > 1 else None, "domain header")
    if len(header) != 2 or header[0] != "domain":
        raise _err("expected (domain NAME)", header)
    name = _expect_name(header[1], "domain name")
    body = root[2:]

    requirements: list[str] = []
    types: dict = {"object": None}
    constants: list[tuple[str, str]] = []
    predicates: list[Predicate] = []
    schemas: list[ActionSchema] = []

    for item in body:
        item = _expect_list(item, "domain section")
        if not item:
            raise _err("empty section", item)
        key = item[0]
        if key == ":requirements":
            for r in item[1:]:
                r = str(r)
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(r.lstrip(":"))
                requirements.append(r)
        elif key == ":types":
            for child, parent in parse_typed_list(item[1:], "types"):
                if child == "object":
                    continue
                types[child] = parent
            for parent in list(types.values()):
                if parent is not None and parent not in types:
                    types[parent] = "object"
        elif key == ":constants":
            constants.extend(parse_typed_list(item[1:], "constants"))
        elif key == ":predicates":
            seen = set()
            for p in item[1:]:
                p = _expect_list(p, "predicate")
                if not p:
                    raise _err("empty predicate", p)
                pname = _expect_name(p[0], "predicate name")
                if pname in seen:
                    raise _err(f"duplicate predicate {pname}", p[0])
                seen.add(pname)
                predicates.append(Predicate(pname, tuple(parse_typed_list(p[1:], "predicate parameters"))))
        elif key == ":action":
            schemas.append(_parse_action(item))
        elif key in (":functions", ":derived", ":durative-action"):
            raise UnsupportedFeature(str(key).lstrip(":"))
        else:
            raise _err(f"unknown domain section {key}", key)

    dom = DomainModel(name, tuple(requirements), types, tuple(constants), tuple(predicates), tuple(schemas))
    _check_domain(dom)
    return dom


def _parse_action(item) -> ActionSchema:
    if len(item) < 2:
        raise _err("action without name", item)
    name = _expect_name(item[1], "action name")
    params: list[tuple[str, str]] = []
    pre: list[Atom] = []
    add: list[Atom] = []
    dele: list[Atom] = []
    i = 2
    while i < len(item):
        key = item[i]
        if i + 1 >= len(item):
            raise _err(f"missing value for {key}", key)
        val = item[i + 1]
        if key == ":parameters":
            params = parse_typed_list(_expect_list(val, "parameters"), "parameters")
        elif key == ":precondition":
            for positive, atom in _parse_conjunction(val, "precondition"):
                if not positive:
                    raise UnsupportedFeature("negative-preconditions")
                pre.append(atom)
        elif key == ":effect":
            for positive, atom in _parse_conjunction(val, "effect"):
                (add if positive else dele).append(atom)
        else:
            raise _err(f"unknown action field {key}", key)
        i += 2
    return ActionSchema(name, tuple(params), tuple(pre), tuple(add), tuple(dele))


def _check_domain(dom: DomainModel) -> None:
    for t in dom.types:
        # cycle check
        seen = set()
        while t is not None:
            if t in seen:
                raise PDDLError(f"cyclic type hierarchy at {t}")
            seen.add(t)
            t = dom.types.get(t)
    for cname, ctype in dom.constants:
        if ctype not in dom.types:
            raise UnknownObjectType(f"constant {cname} has unknown type {ctype}")
    for p in dom.predicates:
        for _, t in p.params:
            if t not in dom.types:
                raise UnknownObjectType(f"predicate {p.name} uses unknown type {t}")
    consts = dict(dom.constants)
    preds = dom.predicate_map
    for s in dom.schemas:
        var_types = {}
        for v, t in s.parameters:
            if not v.startswith("?"):
                raise PDDLSyntaxError(f"parameter {v} of {s.name} is not a variable")
            if t not in dom.types:
                raise UnknownObjectType(f"action {s.name} parameter {v} has unknown type {t}")
            var_types[v] = t
        for atom in s.precondition + s.add_effects + s.del_effects:
            p = preds.get(atom[0])
            if p is None:
                raise UnknownPredicate(f"action {s.name} uses undeclared predicate {atom[0]}")
            if len(atom) - 1 != p.arity:
                raise ArityMismatch(f"action {s.name}: {atom[0]} expects {p.arity} arguments, got {len(atom) - 1}")
            for arg, (_, ptype) in zip(atom[1:], p.params):
                if arg.startswith("?"):
                    if arg not in var_types:
                        raise PDDLError(f"action {s.name} uses unbound variable {arg}")
                    t = var_types[arg]
                elif arg in consts:
                    t = consts[arg]
                else:
                    raise UnknownObject(f"action {s.name} mentions unknown constant {arg}")
                # a parameter may be declared with a supertype; only reject disjoint types
                if not (dom.is_subtype(t, ptype) or dom.is_subtype(ptype, t)):
                    raise TypeMismatch(f"action {s.name}: {arg} of type {t} incompatible with {ptype} in {atom[0]}")


def parse_problem(text: str, dom: DomainModel) -> InstanceModel:
    root = parse_sexpr(text)
    if not root or root[0] != "define":
        raise _err("expected (define ...)", root)
    header = _expect_list(root[1] if len(root) > 1 else None, "problem header")
    if len(header) != 2 or header[0] != "problem":
        raise _err("expected (problem NAME)", header)
    name = _expect_name(header[1], "problem name")
    dname = None
    objects: list[tuple[str, str]] = []
    init: list[Atom] = []
    goal: list[Atom] = []
    for item in root[2:]:
        item = _expect_list(item, "problem section")
        if not item:
            raise _err("empty section", item)
        key = item[0]
        if key == ":domain":
            dname = _expect_name(item[1], "domain name")
        elif key == ":requirements":
            for r in item[1:]:
                if str(r) not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeature(str(r).lstrip(":"))
        elif key == ":objects":
            objects.extend(parse_typed_list(item[1:], "objects"))
        elif key == ":init":
            for a in item[1:]:
                init.append(_parse_atom(a, "init"))
        elif key == ":goal":
            if len(item) != 2:
                raise _err("goal takes one formula", item)
            for positive, atom in _parse_conjunction(item[1], "goal"):
                if not positive:
                    raise UnsupportedFeature("negative-goals")
                goal.append(atom)
        elif key == ":metric":
            raise UnsupportedFeature("metric")
        else:
            raise _err(f"unknown problem section {key}", key)
    if dname is not None and dname != dom.name:
        raise PDDLError(f"problem is for domain {dname}, not {dom.name}")

    inst = InstanceModel(name, dname or dom.name, tuple(objects), tuple(dict.fromkeys(init)), tuple(dict.fromkeys(goal)))
    _check_problem(inst, dom)
    return inst


def _check_problem(inst: InstanceModel, dom: DomainModel) -> None:
    obj_types = dict(dom.constants)
    for o, t in inst.objects:
        if t not in dom.types:
            raise UnknownObjectType(f"object {o} has unknown type {t}")
        if o in obj_types and obj_types[o] != t:
            raise PDDLError(f"object {o} declared twice with different types")
        obj_types[o] = t
    preds = dom.predicate_map
    for atom in inst.init + inst.goal:
        p = preds.get(atom[0])
        if p is None:
            raise UnknownPredicate(f"undeclared predicate {atom[0]}")
        if len(atom) - 1 != p.arity:
            raise ArityMismatch(f"{atom[0]} expects {p.arity} arguments, got {len(atom) - 1}")
        for arg, (_, ptype) in zip(atom[1:], p.params):
            if arg not in obj_types:
                raise UnknownObject(f"unknown object {arg} in {format_atom(atom)}")
            if not dom.is_subtype(obj_types[arg], ptype):
                raise TypeMismatch(f"{arg} of type {obj_types[arg]} not allowed in {format_atom(atom)}")


# ---------------------------------------------------------------------------
# emission

def _typed_list_text(items: Iterable[tuple[str, str]], untyped: bool = False) -> str:
    parts = []
    for n, t in items:
        parts.append(n if untyped else f"{n} - {t}")
    return " ".join(parts)


def _atom_text(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"


def emit_domain(dom: DomainModel) -> str:
    lines = [f"(define (domain {dom.name})"]
    if dom.requirements:
        lines.append(f"  (:requirements {' '.join(dom.requirements)})")
    child_types = [(c, p) for c, p in dom.types.items() if c != "object"]
    if child_types:
        lines.append(f"  (:types {_typed_list_text(child_types)})")
    if dom.constants:
        lines.append(f"  (:constants {_typed_list_text(dom.constants)})")
    lines.append("  (:predicates")
    for p in dom.predicates:
        args = _typed_list_text(p.params)
        lines.append(f"    ({p.name}{' ' + args if args else ''})")
    lines.append("  )")
    for s in dom.schemas:
        lines.append(f"  (:action {s.name}")
        lines.append(f"    :parameters ({_typed_list_text(s.parameters)})")
        lines.append(f"    :precondition (and {' '.join(_atom_text(a) for a in s.precondition)})")
        eff = [_atom_text(a) for a in s.add_effects] + [f"(not {_atom_text(a)})" for a in s.del_effects]
        lines.append(f"    :effect (and {' '.join(eff)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def emit_problem(inst: InstanceModel) -> str:
    lines = [f"(define (problem {inst.name})", f"  (:domain {inst.domain_name})"]
    lines.append(f"  (:objects {_typed_list_text(inst.objects)})")
    lines.append("  (:init")
    for a in inst.init:
        lines.append(f"    {_atom_text(a)}")
    lines.append("  )")
    lines.append(f"  (:goal (and {' '.join(_atom_text(a) for a in inst.goal)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_atom(atom: Atom) -> str:
    return f"{atom[0]}({', '.join(atom[1:])})"


# ---------------------------------------------------------------------------
# grounding

@dataclass(frozen=True, eq=False)
class GroundAction:
    name: str
    args: tuple[str, ...]
    pre: frozenset
    add: frozenset
    delete: frozenset
    pre_mask: int = field(repr=False, default=0)
    add_mask: int = field(repr=False, default=0)
    del_mask: int = field(repr=False, default=0)

    def label(self) -> str:
        return f"{self.name}({', '.join(self.args)})"

    def pddl(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"


def _mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def make_action(name, args, pre, add, delete) -> GroundAction:
    pre, add = frozenset(pre), frozenset(add)
    delete = frozenset(delete) - add
    return GroundAction(name, tuple(args), pre, add, delete, _mask(pre), _mask(add), _mask(delete))


@dataclass(frozen=True, eq=False)
class GroundedTask:
    """Indexed ground task.  States are ints; bit i set means atom i holds."""

    name: str
    domain_name: str
    atoms: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: State
    goal: frozenset
    objects: dict = field(default_factory=dict)  # object -> type
    static_atoms: frozenset = frozenset()
    ug_atoms: dict = field(default_factory=dict)  # goal atom index -> p_ug index

    @cached_property
    def atom_index(self) -> dict:
        return {a: i for i, a in enumerate(self.atoms)}

    @cached_property
    def goal_mask(self) -> int:
        return _mask(self.goal)

    @cached_property
    def n_original_atoms(self) -> int:
        return len(self.atoms) - len(self.ug_atoms)

    @cached_property
    def triggers(self) -> tuple:
        """Per atom, the actions whose rarest precondition atom it is.
        Actions with empty preconditions are listed under ``always``."""
        count = [0] * len(self.atoms)
        for a in self.actions:
            for p in a.pre:
                count[p] += 1
        by_atom: list[list] = [[] for _ in self.atoms]
        always = []
        for idx, a in enumerate(self.actions):
            if not a.pre:
                always.append((idx, 0))
                continue
            key = min(a.pre, key=lambda p: (count[p], p))
            by_atom[key].append((idx, a.pre_mask))
        return tuple(tuple(x) for x in by_atom), tuple(always)

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.domain_name.encode())
        h.update(b"\0")
        h.update(self.name.encode())
        for a in self.atoms:
            h.update(("|" + " ".join(a)).encode())
        for act in self.actions:
            h.update(("#" + act.label()).encode())
        h.update(f"init={self.init:x};goal={sorted(self.goal)}".encode())
        return h.hexdigest()[:16]

    def atom_of(self, pred: str, *args: str) -> int | None:
        return self.atom_index.get((pred,) + tuple(args))

    def objects_of_type(self, typ: str) -> list[str]:
        return sorted(o for o, t in self.objects.items() if t == typ)

    def state_atoms(self, s: State) -> list[Atom]:
        return [self.atoms[i] for i in state_indices(s)]

    def state_from_atoms(self, atoms: Iterable[Atom]) -> State:
        return _mask(self.atom_index[tuple(a)] for a in atoms)

    def describe(self, s: State) -> str:
        return "{" + ", ".join(format_atom(a) for a in self.state_atoms(s)) + "}"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "domain": self.domain_name,
            "atoms": [format_atom(a) for a in self.atoms],
            "actions": [
                {"name": a.label(), "pre": sorted(a.pre), "add": sorted(a.add), "del": sorted(a.delete)}
                for a in self.actions
            ],
            "init": state_indices(self.init),
            "goal": sorted(self.goal),
        }


def state_indices(s: State) -> list[int]:
    """Sorted atom indices of a state."""
    out = []
    while s:
        low = s & -s
        out.append(low.bit_length() - 1)
        s ^= low
    return out


def make_state(indices: Iterable[int]) -> State:
    return _mask(indices)


def static_predicates(dom: DomainModel) -> set[str]:
    fluent = set()
    for s in dom.schemas:
        for a in s.add_effects + s.del_effects:
            fluent.add(a[0])
    return {p.name for p in dom.predicates} - fluent


def ground(dom: DomainModel, inst: InstanceModel, cap: int = DEFAULT_GROUNDING_CAP) -> GroundedTask:
    """Enumerate type-consistent ground actions, compiling out static atoms.

    Actions whose static preconditions fail are dropped, as are actions that
    cannot change any state.  Only atoms that are relaxed-reachable from the
    initial state (plus goal atoms) get an index.
    """
    statics = static_predicates(dom)
    obj_types = dict(dom.constants)
    obj_types.update(dict(inst.objects))
    by_type: dict[str, list[str]] = {}
    for t in dom.types:
        by_type[t] = sorted(o for o, ot in obj_types.items() if dom.is_subtype(ot, t))

    init = set(inst.init)
    static_true = {a for a in init if a[0] in statics}
    static_by_pred: dict[str, set] = {}
    for a in static_true:
        static_by_pred.setdefault(a[0], set()).add(a[1:])

    raw: list[tuple] = []
    for schema in dom.schemas:
        raw.extend(_ground_schema(schema, by_type, statics, static_by_pred, cap - len(raw)))

    # relaxed reachability: keep actions whose preconditions can become true
    reached = {a for a in init if a[0] not in statics}
    pending = list(raw)
    useful = []
    changed = True
    while changed:
        changed = False
        rest = []
        for item in pending:
            if all(p in reached for p in item[2]):
                useful.append(item)
                for a in item[3]:
                    if a not in reached:
                        reached.add(a)
                        changed = True
            else:
                rest.append(item)
        pending = rest

    goal_static = [g for g in inst.goal if g[0] in statics]
    goal_dyn = [g for g in inst.goal if g[0] not in statics]
    atom_set = set(reached)
    for item in useful:
        atom_set.update(item[4])
    atom_set.update(goal_dyn)
    # a static goal atom that is false can never be achieved; keep it as an
    # unreachable atom so that the task is recognisably unsolvable
    atom_set.update(g for g in goal_static if g not in static_true)
    atoms = tuple(sorted(atom_set))
    index = {a: i for i, a in enumerate(atoms)}

    actions = []
    for name, args, pre, add, dele in sorted(useful, key=lambda it: (it[0], it[1])):
        pi = {index[p] for p in pre}
        ai = {index[a] for a in add}
        di = {index[d] for d in dele if d in index} - ai
        if not di and ai <= pi:
            continue
        actions.append(make_action(name, args, pi, ai, di))

    init_state = _mask(index[a] for a in init if a in index)
    goal = frozenset(index[g] for g in inst.goal if g in index)
    return GroundedTask(
        inst.name, dom.name, atoms, tuple(actions), init_state, goal,
        objects=obj_types, static_atoms=frozenset(static_true),
    )


def _ground_schema(schema, by_type, statics, static_by_pred, budget):
    params = [v for v, _ in schema.parameters]
    domains = [by_type.get(t, []) for _, t in schema.parameters]
    static_pre = [a for a in schema.precondition if a[0] in statics]
    dyn_pre = [a for a in schema.precondition if a[0] not in statics]

    # attach each static precondition to the last parameter it mentions so it
    # can be tested as soon as that parameter is bound
    pos = {v: i for i, v in enumerate(params)}
    checks: list[list] = [[] for _ in params]
    ground_checks = []
    for a in static_pre:
        idxs = [pos[x] for x in a[1:] if x in pos]
        if idxs:
            checks[max(idxs)].append(a)
        else:
            ground_checks.append(a)
    for a in ground_checks:
        if a[1:] not in static_by_pred.get(a[0], ()):
            return []

    out = []
    binding: dict[str, str] = {}

    def subst(atom):
        return (atom[0],) + tuple(binding.get(x, x) for x in atom[1:])

    def rec(i):
        if i == len(params):
            if len(out) >= budget:
                raise GroundingExplosion(f"more than {budget} ground actions")
            args = tuple(binding[v] for v in params)
            out.append((schema.name, args, tuple(subst(a) for a in dyn_pre),
                        tuple(subst(a) for a in schema.add_effects),
                        tuple(subst(a) for a in schema.del_effects)))
            return
        v = params[i]
        for o in domains[i]:
            binding[v] = o
            ok = True
            for a in checks[i]:
                if subst(a)[1:] not in static_by_pred.get(a[0], ()):
                    ok = False
                    break
            if ok:
                rec(i + 1)
        binding.pop(v, None)

    rec(0)
    return out


def add_unsatisfied_goal_predicates(task: GroundedTask) -> GroundedTask:
    """Append a ``<pred>_ug`` atom per goal atom, true exactly when the goal
    atom is false, and keep it maintained by rewriting action effects."""
    if not task.goal or task.ug_atoms:
        return task
    n = len(task.atoms)
    goals = sorted(task.goal)
    ug = {g: n + i for i, g in enumerate(goals)}
    new_atoms = task.atoms + tuple((task.atoms[g][0] + "_ug",) + task.atoms[g][1:] for g in goals)
    actions = []
    for a in task.actions:
        add = set(a.add) | {ug[d] for d in a.delete if d in ug}
        dele = set(a.delete) | {ug[p] for p in a.add if p in ug}
        actions.append(make_action(a.name, a.args, a.pre, add, dele))
    init = task.init
    for g in goals:
        if not (task.init >> g) & 1:
            init |= 1 << ug[g]
    return GroundedTask(
        task.name, task.domain_name, new_atoms, tuple(actions), init, task.goal,
        objects=task.objects, static_atoms=task.static_atoms, ug_atoms=ug,
    )


def load_task(domain_text: str, problem_text: str, cap: int = DEFAULT_GROUNDING_CAP,
              unsatisfied_goals: bool = False) -> GroundedTask:
    dom = parse_domain(domain_text)
    task = ground(dom, parse_problem(problem_text, dom), cap)
    return add_unsatisfied_goal_predicates(task) if unsatisfied_goals else task


def load_task_files(domain_path, problem_path, **kw) -> GroundedTask:
    with open(domain_path) as f:
        d = f.read()
    with open(problem_path) as f:
        p = f.read()
    return load_task(d, p, **kw)


def dump_task_json(task: GroundedTask) -> str:
    return json.dumps(task.to_json(), indent=1)
