"""Feature-based sketch rules and the built-in rulesets R1-R4.

A rule ``C -> E`` holds for a state pair (s, s2) when the conditions C are
true in s and every feature changes as E says.  Features that E does not
mention must keep their value; ``?`` releases a feature.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .pddl import GroundedTask, State
from .statespace import StateSpaceTooLarge, reachable_graph  # noqa: F401  (re-exported error)


class UnknownBinding(Exception):
    pass


class UnknownFeature(Exception):
    pass


class RulesetError(Exception):
    pass


# ---------------------------------------------------------------------------
# features

@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "bool" | "num"
    builder: Callable[[GroundedTask], Callable[[State], object]] = field(repr=False, compare=False)

    def compile(self, task: GroundedTask) -> Callable[[State], object]:
        per_task = _compiled.setdefault(task, {})
        fn = per_task.get(self.name)
        if fn is None:
            fn = per_task[self.name] = self.builder(task)
        return fn

    def evaluate(self, task: GroundedTask, s: State):
        return self.compile(task)(s)


_compiled: "weakref.WeakKeyDictionary[GroundedTask, dict]" = weakref.WeakKeyDictionary()

FEATURES: dict[str, tuple[str, Callable]] = {}


def register_feature(name: str, kind: str):
    """Decorator registering ``builder(task) -> evaluator(state)``."""
    if kind not in ("bool", "num"):
        raise ValueError(kind)

    def deco(builder):
        FEATURES[name] = (kind, builder)
        return builder
    return deco


def feature(name: str) -> Feature:
    try:
        kind, builder = FEATURES[name]
    except KeyError:
        raise UnknownFeature(f"no registered feature {name!r}") from None
    return Feature(name, kind, builder)


def _mask(task, atoms) -> int:
    m = 0
    for a in atoms:
        i = task.atom_index.get(a)
        if i is not None:
            m |= 1 << i
    return m


def _goal_args(task, pred, pos=1) -> list[str]:
    return sorted({task.atoms[g][pos] for g in task.goal if task.atoms[g][0] == pred})


@register_feature("goals.unachieved", "num")
def _unachieved(task):
    gm = task.goal_mask
    return lambda s: (gm & ~s).bit_count()


@register_feature("delivery.held", "bool")
def _delivery_held(task):
    pkgs = set(_goal_args(task, "at"))
    m = _mask(task, [a for a in task.atoms if a[0] == "carrying" and a[2] in pkgs])
    return lambda s: bool(s & m)


@register_feature("gripper.pickable", "num")
def _gripper_pickable(task):
    # min(undelivered goal balls not in a gripper, free grippers)
    balls = []
    for g in sorted(task.goal):
        atom = task.atoms[g]
        if atom[0] != "at":
            continue
        carry = _mask(task, [a for a in task.atoms if a[0] == "carry" and a[1] == atom[1]])
        balls.append(((1 << g) | carry))
    free = _mask(task, [a for a in task.atoms if a[0] == "free"])

    def f(s):
        waiting = sum(1 for m in balls if not s & m)
        return min(waiting, (s & free).bit_count())
    return f


@register_feature("miconic.waiting", "num")
def _miconic_waiting(task):
    people = []
    for p in _goal_args(task, "served"):
        people.append(_mask(task, [("served", p), ("boarded", p)]))
    return lambda s: sum(1 for m in people if not s & m)


@register_feature("spanner.uncollected", "num")
def _spanner_uncollected(task):
    masks = []
    for sp in task.objects_of_type("spanner"):
        masks.append(_mask(task, [a for a in task.atoms if a[0] == "carrying" and a[2] == sp]))
    return lambda s: sum(1 for m in masks if not s & m)


@register_feature("childsnack.unprepared", "num")
def _childsnack_unprepared(task):
    """Unserved children not covered by a suitable sandwich already on a
    tray; one more than the number of unserved children when the remaining
    ingredients can no longer feed everyone."""
    statics = task.static_atoms
    children = _goal_args(task, "served")
    allergic = [(1 << task.atom_index[("served", c)]) for c in children
                if ("allergic_gluten", c) in statics and ("served", c) in task.atom_index]
    normal = [(1 << task.atom_index[("served", c)]) for c in children
              if ("allergic_gluten", c) not in statics and ("served", c) in task.atom_index]
    ontray: dict[str, int] = {}
    for a in task.atoms:
        if a[0] == "ontray":
            ontray[a[1]] = ontray.get(a[1], 0) | (1 << task.atom_index[a])
    ontray_items = [(ontray[s], 1 << task.atom_index[("no_gluten_sandwich", s)]
                     if ("no_gluten_sandwich", s) in task.atom_index else 0)
                    for s in sorted(ontray)]
    kitchen = []
    for a in task.atoms:
        if a[0] == "at_kitchen_sandwich":
            gf = task.atom_index.get(("no_gluten_sandwich", a[1]))
            kitchen.append((1 << task.atom_index[a], 0 if gf is None else 1 << gf))
    notexist = _mask(task, [a for a in task.atoms if a[0] == "notexist"])
    bread = _mask(task, [a for a in task.atoms if a[0] == "at_kitchen_bread"])
    content = _mask(task, [a for a in task.atoms if a[0] == "at_kitchen_content"])
    gf_bread = _mask(task, [("at_kitchen_bread", a[1]) for a in statics if a[0] == "no_gluten_bread"])
    gf_content = _mask(task, [("at_kitchen_content", a[1]) for a in statics if a[0] == "no_gluten_content"])
    has_tray = bool(task.objects_of_type("tray"))

    def f(s):
        n_a = sum(1 for m in allergic if not s & m)
        n_b = sum(1 for m in normal if not s & m)
        unserved = n_a + n_b
        if unserved == 0:
            return 0
        t_gf = t_n = 0
        for tray_mask, gf_mask in ontray_items:
            if s & tray_mask:
                if s & gf_mask:
                    t_gf += 1
                else:
                    t_n += 1
        cov_a = min(n_a, t_gf)
        cov_b = min(n_b, t_n + t_gf - cov_a)
        rest_a, rest_b = n_a - cov_a, n_b - cov_b
        if (rest_a or rest_b) and not has_tray:
            return unserved + 1
        k_gf = k_n = 0
        for km, gm in kitchen:
            if s & km:
                if s & gm:
                    k_gf += 1
                else:
                    k_n += 1
        free = (s & notexist).bit_count()
        bt, ct = (s & bread).bit_count(), (s & content).bit_count()
        bg, cg = (s & gf_bread).bit_count(), (s & gf_content).bit_count()
        use_kgf = min(k_gf, rest_a)
        new_gf = rest_a - use_kgf
        if new_gf > min(bg, cg, free):
            return unserved + 1
        spare = k_n + k_gf - use_kgf
        new_n = max(0, rest_b - spare)
        if new_n > min(bt - new_gf, ct - new_gf, free - new_gf):
            return unserved + 1
        return rest_a + rest_b
    return f


# ---------------------------------------------------------------------------
# rules

BOOL_CONDITIONS = (True, False)
NUM_CONDITIONS = ("=0", ">0")
BOOL_EFFECTS = (True, False, "?")
NUM_EFFECTS = ("dec", "inc", "?")


@dataclass(frozen=True)
class SketchRule:
    conditions: tuple  # ((feature name, test), ...)
    effects: tuple  # ((feature name, change), ...)

    def describe(self) -> str:
        def cond(n, c):
            if c is True:
                return n
            if c is False:
                return "¬" + n
            return f"{n}{' = 0' if c == '=0' else ' > 0'}"

        def eff(n, e):
            return {True: n, False: "¬" + n, "?": n + "?", "dec": n + "↓", "inc": n + "↑"}[e]
        return ("{" + ", ".join(cond(n, c) for n, c in self.conditions) + "} -> {"
                + ", ".join(eff(n, e) for n, e in self.effects) + "}")


@dataclass(frozen=True)
class Ruleset:
    name: str
    features: tuple[tuple[str, Feature], ...]  # (local name, feature)
    rules: tuple[SketchRule, ...]

    def __post_init__(self):
        kinds = {n: f.kind for n, f in self.features}
        if len(kinds) != len(self.features):
            raise RulesetError("duplicate feature name")
        for r in self.rules:
            for n, c in r.conditions:
                if n not in kinds:
                    raise RulesetError(f"condition on undeclared feature {n}")
                ok = BOOL_CONDITIONS if kinds[n] == "bool" else NUM_CONDITIONS
                if c not in ok:
                    raise RulesetError(f"bad condition {c!r} on {kinds[n]} feature {n}")
            for n, e in r.effects:
                if n not in kinds:
                    raise RulesetError(f"effect on undeclared feature {n}")
                ok = BOOL_EFFECTS if kinds[n] == "bool" else NUM_EFFECTS
                if e not in ok:
                    raise RulesetError(f"bad effect {e!r} on {kinds[n]} feature {n}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.features)

    def evaluator(self, task: GroundedTask) -> Callable[[State], tuple]:
        fns = [f.compile(task) for _, f in self.features]
        return lambda s: tuple(fn(s) for fn in fns)

    def matcher(self) -> Callable[[tuple, tuple], int | None]:
        """Compile the rules into ``match(values_s, values_s2) -> rule index``."""
        pos = {n: i for i, (n, _) in enumerate(self.features)}
        compiled = []
        for r in self.rules:
            conds = [(pos[n], c) for n, c in r.conditions]
            eff = dict(r.effects)
            checks = []
            for n, i in pos.items():
                checks.append((i, eff.get(n, "=")))
            compiled.append((conds, checks))

        def match(v1, v2):
            for ri, (conds, checks) in enumerate(compiled):
                if not all(_cond(v1[i], c) for i, c in conds):
                    continue
                if all(_effect(v1[i], v2[i], e) for i, e in checks):
                    return ri
            return None
        return match

    def describe(self) -> str:
        return "\n".join(f"{i}: {r.describe()}" for i, r in enumerate(self.rules))


def _cond(v, c) -> bool:
    if c is True:
        return bool(v)
    if c is False:
        return not v
    if c == "=0":
        return v == 0
    return v > 0


def _effect(v1, v2, e) -> bool:
    if e == "=":
        return v1 == v2
    if e == "?":
        return True
    if e is True:
        return bool(v2)
    if e is False:
        return not v2
    if e == "dec":
        return v2 < v1
    return v2 > v1


def eval_features(ruleset: Ruleset, task: GroundedTask, s: State) -> dict:
    vals = ruleset.evaluator(task)(s)
    return dict(zip(ruleset.feature_names, vals))


def pair_satisfies(ruleset: Ruleset, task: GroundedTask, s: State, s2: State) -> int | None:
    ev = ruleset.evaluator(task)
    return ruleset.matcher()(ev(s), ev(s2))


def subgoal_set(ruleset: Ruleset, task: GroundedTask, s: State, candidates: Iterable[State]) -> set[State]:
    ev = ruleset.evaluator(task)
    match = ruleset.matcher()
    v1 = ev(s)
    return {c for c in candidates if match(v1, ev(c)) is not None}


# ---------------------------------------------------------------------------
# safety and acyclicity

@dataclass
class SafetyReport:
    safe: bool
    acyclic: bool
    alive: int
    edges: int
    no_subgoal: int  # alive states whose subgoal set is empty
    witness: list = field(default_factory=list)  # sequence of states
    problem: str = ""

    @property
    def ok(self) -> bool:
        return self.safe and self.acyclic


def closest_subgoals(ruleset: Ruleset, graph, values: list, sid: int, match) -> list[int]:
    """Ids of the closest states s2 (by BFS distance, s2 != s) such that
    (s, s2) satisfies a rule."""
    v1 = values[sid]
    seen = {sid}
    layer = [sid]
    edges = graph.edges
    while layer:
        nxt = []
        hits = []
        for u in layer:
            for v in edges[u]:
                if v in seen:
                    continue
                seen.add(v)
                nxt.append(v)
                if match(v1, values[v]) is not None:
                    hits.append(v)
        if hits:
            return sorted(hits)
        layer = nxt
    return []


def check_safe_acyclic(ruleset: Ruleset, task: GroundedTask, cap: int = 50_000) -> SafetyReport:
    """Exhaustively check that following closest subgoals from any alive
    state never reaches a dead end and never revisits a state."""
    graph = reachable_graph(task, cap)
    ev = ruleset.evaluator(task)
    values = [ev(s) for s in graph.states]
    match = ruleset.matcher()
    n = len(graph.states)
    alive = [i for i in range(n) if graph.solvable[i] and i not in graph.goals]
    star: dict[int, list[int]] = {}
    no_sub = 0
    for i in alive:
        star[i] = closest_subgoals(ruleset, graph, values, i, match)
        if not star[i]:
            no_sub += 1
    n_edges = sum(len(v) for v in star.values())
    report = SafetyReport(True, True, len(alive), n_edges, no_sub)

    for i in alive:
        for j in star[i]:
            if not graph.solvable[j]:
                report.safe = False
                report.witness = [graph.states[i], graph.states[j]]
                report.problem = "subgoal is a dead end"
                return report

    # iterative DFS for a cycle among alive states
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(alive, WHITE)
    for start in alive:
        if color[start] != WHITE:
            continue
        stack = [(start, iter(star[start]))]
        path = [start]
        color[start] = GREY
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                c = color.get(v)
                if c is None:  # goal state, no outgoing subgoals
                    continue
                if c == GREY:
                    cyc = path[path.index(v):] + [v]
                    report.acyclic = False
                    report.witness = [graph.states[x] for x in cyc]
                    report.problem = f"subgoal cycle of length {len(cyc) - 1}"
                    return report
                if c == WHITE:
                    color[v] = GREY
                    stack.append((v, iter(star[v])))
                    path.append(v)
                    advanced = True
                    break
            if not advanced:
                color[u] = BLACK
                stack.pop()
                path.pop()
    return report


# ---------------------------------------------------------------------------
# built-in rulesets

DOMAIN_ALIASES = {
    "child-snack": "childsnack",
    "grid-visit-all": "visitall",
    "visit-all": "visitall",
    "blocksworld": "blocks",
    "miconic-strips": "miconic",
    "gripper-strips": "gripper",
}


def domain_tag(name: str) -> str:
    name = name.lower()
    return DOMAIN_ALIASES.get(name, name)


def _rule(conds: Mapping, effs: Mapping) -> SketchRule:
    return SketchRule(tuple(conds.items()), tuple(effs.items()))


_R1 = [_rule({"N": ">0"}, {"N": "dec"})]
_R2 = [_rule({"H": False, "N": ">0"}, {"H": True}),
       _rule({"H": True, "N": ">0"}, {"H": False, "N": "dec"})]
_R3 = [_rule({"N2": ">0"}, {"N2": "dec"}),
       _rule({"N1": ">0", "N2": "=0"}, {"N1": "dec"})]
_R4 = [_rule({"N2": ">0"}, {"N2": "dec"}),
       _rule({"N1": ">0", "N2": "=0"}, {"N1": "dec", "N2": "?"})]

BINDINGS = {
    ("R1", "reward"): (_R1, {"N": "goals.unachieved"}),
    ("R1", "delivery"): (_R1, {"N": "goals.unachieved"}),
    ("R2", "delivery"): (_R2, {"H": "delivery.held", "N": "goals.unachieved"}),
    ("R3", "miconic"): (_R3, {"N1": "goals.unachieved", "N2": "miconic.waiting"}),
    ("R3", "childsnack"): (_R3, {"N1": "goals.unachieved", "N2": "childsnack.unprepared"}),
    ("R3", "spanner"): (_R3, {"N1": "goals.unachieved", "N2": "spanner.uncollected"}),
    ("R4", "gripper"): (_R4, {"N1": "goals.unachieved", "N2": "gripper.pickable"}),
}


def builtin_ruleset(name: str, domain: str) -> Ruleset:
    key = (name.upper(), domain_tag(domain))
    if key not in BINDINGS:
        known = ", ".join(f"{r}/{d}" for r, d in sorted(BINDINGS))
        raise UnknownBinding(f"no ruleset {key[0]} for domain {key[1]} (known: {known})")
    rules, feats = BINDINGS[key]
    return Ruleset(f"{key[0]}:{key[1]}", tuple((n, feature(f)) for n, f in feats.items()), tuple(rules))


def ruleset_from_dict(data: Mapping, name: str = "custom") -> Ruleset:
    """Build a ruleset from ``{"features": {local: registered}, "rules":
    [{"conditions": {...}, "effects": {...}}]}``.  Numeric conditions are
    "=0"/">0", numeric effects "dec"/"inc"/"?", boolean ones true/false/"?"."""
    try:
        feats = tuple((n, feature(f)) for n, f in data["features"].items())
        rules = tuple(_rule(r.get("conditions", {}), r.get("effects", {})) for r in data["rules"])
    except (KeyError, TypeError, AttributeError) as e:
        raise RulesetError(f"malformed ruleset description: {e}") from None
    return Ruleset(data.get("name", name), feats, rules)


def load_ruleset(path) -> Ruleset:
    with open(path) as f:
        return ruleset_from_dict(json.load(f), name=str(path))


def ruleset_to_dict(rs: Ruleset) -> dict:
    return {
        "name": rs.name,
        "features": {n: f.name for n, f in rs.features},
        "rules": [{"conditions": dict(r.conditions), "effects": dict(r.effects)} for r in rs.rules],
    }
