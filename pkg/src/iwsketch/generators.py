"""Seeded PDDL instance generators for the bundled domains.

Every generator is a pure function of its ``GenSpec``; the random stream is
``random.Random(seed)`` so output is byte-identical across platforms.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from importlib import resources

DOMAINS = ("delivery", "gripper", "spanner", "miconic", "reward", "visitall", "blocks", "childsnack")


class InvalidSpec(ValueError):
    pass


# parameter name -> default, per domain
DEFAULTS = {
    "delivery": {"x": 5, "y": 5, "packages": 1, "agents": 1, "unique_targets": False},
    "gripper": {"balls": 1},
    "spanner": {"spanners": 1, "nuts": 1, "locations": 1},
    "miconic": {"floors": 2, "passengers": 1},
    "reward": {"x": 5, "y": 5, "rewards": 1, "obstacles": 0},
    "visitall": {"x": 3, "y": 3, "fraction": 1.0},
    "blocks": {"blocks": 3, "towers": 1},
    "childsnack": {"children": 1, "gluten": 0.0, "trays": 1, "tables": 3},
}

# the count shown on the x axis of subgoal curves
CHARACTERISTIC = {
    "delivery": "packages", "gripper": "balls", "spanner": "nuts", "miconic": "passengers",
    "reward": "rewards", "visitall": "cells", "blocks": "blocks", "childsnack": "children",
}


@dataclass(frozen=True)
class GenSpec:
    domain: str
    params: tuple = ()  # sorted (name, value) pairs
    seed: int = 0

    @classmethod
    def make(cls, domain: str, seed: int = 0, **params) -> "GenSpec":
        if domain not in DEFAULTS:
            raise InvalidSpec(f"unknown domain {domain!r}")
        unknown = set(params) - set(DEFAULTS[domain])
        if unknown:
            raise InvalidSpec(f"unknown parameters for {domain}: {sorted(unknown)}")
        full = dict(DEFAULTS[domain])
        full.update(params)
        return cls(domain, tuple(sorted(full.items())), seed)

    @property
    def p(self) -> dict:
        return dict(self.params)

    @property
    def instance_id(self) -> str:
        parts = [self.domain]
        for k, v in self.params:
            if isinstance(v, bool):
                if v:
                    parts.append(k)
            elif isinstance(v, float):
                parts.append(f"{k}{v:g}")
            else:
                parts.append(f"{k}{v}")
        parts.append(f"s{self.seed}")
        return "_".join(parts)

    def characteristic(self) -> int:
        p = self.p
        if self.domain == "visitall":
            return p["x"] * p["y"]
        return p[CHARACTERISTIC[self.domain]]


def domain_text(domain: str) -> str:
    if domain not in DOMAINS:
        raise InvalidSpec(f"unknown domain {domain!r}")
    return resources.files("iwsketch.domains").joinpath(f"{domain}.pddl").read_text()


def generate(spec: GenSpec) -> tuple[str, str]:
    gen = _GENERATORS.get(spec.domain)
    if gen is None:
        raise InvalidSpec(f"unknown domain {spec.domain!r}")
    p = spec.p
    for k, v in p.items():
        if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
            raise InvalidSpec(f"{k} must be >= 0")
    rng = random.Random(f"{spec.domain}:{spec.seed}")
    return domain_text(spec.domain), gen(spec, p, rng)


def _problem(name, domain, objects, init, goal) -> str:
    lines = [f"(define (problem {name})", f"  (:domain {domain})", "  (:objects"]
    for names, typ in objects:
        if names:
            lines.append("    " + " ".join(names) + (f" - {typ}" if typ else ""))
    lines.append("  )")
    lines.append("  (:init")
    for a in init:
        lines.append("    (" + " ".join(a) + ")")
    lines.append("  )")
    lines.append("  (:goal (and")
    for a in goal:
        lines.append("    (" + " ".join(a) + ")")
    lines.append("  ))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _grid(x, y):
    if x < 1 or y < 1:
        raise InvalidSpec("grid dimensions must be >= 1")
    cells = [f"c_{i}_{j}" for i in range(x) for j in range(y)]
    adj = []
    for i in range(x):
        for j in range(y):
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, b = i + di, j + dj
                if 0 <= a < x and 0 <= b < y:
                    adj.append((f"c_{a}_{b}", f"c_{i}_{j}"))
    return cells, sorted(adj)


def gen_delivery(spec, p, rng) -> str:
    x, y, n, agents = p["x"], p["y"], p["packages"], p["agents"]
    cells, adj = _grid(x, y)
    if len(cells) < 2 and n > 0:
        raise InvalidSpec("need at least two cells to deliver packages")
    target = rng.choice(cells)
    pkgs = [f"p{i}" for i in range(1, n + 1)]
    trucks = [f"t{i}" for i in range(1, agents + 1)]
    init = []
    goal = []
    for pk in pkgs:
        dest = rng.choice([c for c in cells if c != target]) if p["unique_targets"] else target
        start = rng.choice([c for c in cells if c != dest])
        init.append(("at", pk, start))
        goal.append(("at", pk, dest))
    for t in trucks:
        init.append(("at", t, rng.choice(cells)))
        init.append(("empty", t))
    init += [("adjacent", a, b) for a, b in adj]
    return _problem(spec.instance_id, "delivery",
                    [(cells, "cell"), (pkgs, "package"), (trucks, "truck")], init, goal)


def gen_gripper(spec, p, rng) -> str:
    n = p["balls"]
    balls = [f"ball{i}" for i in range(1, n + 1)]
    init = [("room", "rooma"), ("room", "roomb")] + [("ball", b) for b in balls]
    init += [("gripper", "left"), ("gripper", "right"), ("at-robby", "rooma")]
    init += [("at", b, "rooma") for b in balls]
    init += [("free", "left"), ("free", "right")]
    goal = [("at", b, "roomb") for b in balls]
    return _problem(spec.instance_id, "gripper", [(["rooma", "roomb"], ""), (balls, ""), (["left", "right"], "")],
                    init, goal)


def gen_spanner(spec, p, rng) -> str:
    s, n, l = p["spanners"], p["nuts"], p["locations"]
    if s < n:
        raise InvalidSpec("need at least as many spanners as nuts")
    if l < 1 and s > 0:
        raise InvalidSpec("spanners need at least one corridor location")
    locs = [f"location{i}" for i in range(1, l + 1)]
    spanners = [f"spanner{i}" for i in range(1, s + 1)]
    nuts = [f"nut{i}" for i in range(1, n + 1)]
    corridor = ["shed"] + locs + ["gate"]
    init = [("at", "bob", "shed")]
    for sp in spanners:
        init.append(("at", sp, rng.choice(locs)))
        init.append(("useable", sp))
    for nu in nuts:
        init.append(("at", nu, "gate"))
        init.append(("loose", nu))
    init += [("link", a, b) for a, b in zip(corridor, corridor[1:])]
    goal = [("tightened", nu) for nu in nuts]
    return _problem(spec.instance_id, "spanner",
                    [(["bob"], "man"), (nuts, "nut"), (spanners, "spanner"), (corridor, "location")], init, goal)


def gen_miconic(spec, p, rng) -> str:
    nf, npass = p["floors"], p["passengers"]
    if nf < 2 and npass > 0:
        raise InvalidSpec("passengers need at least two floors")
    floors = [f"f{i}" for i in range(nf)]
    people = [f"p{i}" for i in range(npass)]
    init = [("passenger", q) for q in people] + [("floor", f) for f in floors]
    for i, j in itertools.combinations(range(nf), 2):
        init.append(("above", floors[i], floors[j]))
    for q in people:
        o = rng.randrange(nf)
        d = rng.choice([i for i in range(nf) if i != o])
        init.append(("origin", q, floors[o]))
        init.append(("destin", q, floors[d]))
    if floors:
        init.append(("lift-at", floors[0]))
    goal = [("served", q) for q in people]
    return _problem(spec.instance_id, "miconic", [(people, ""), (floors, "")], init, goal)


def _connected(cells: set, start: str, x: int, y: int) -> set:
    seen = {start}
    stack = [start]
    while stack:
        c = stack.pop()
        _, i, j = c.split("_")
        i, j = int(i), int(j)
        for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb = f"c_{i + di}_{j + dj}"
            if nb in cells and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return seen


def gen_reward(spec, p, rng) -> str:
    x, y, r, obst = p["x"], p["y"], p["rewards"], p["obstacles"]
    cells, adj = _grid(x, y)
    start = "c_0_0"
    if obst + r > len(cells) - 1:
        raise InvalidSpec("rewards plus obstacles exceed the free cells")
    for _ in range(1000):
        blocked = set(rng.sample(cells[1:], obst))
        free = set(cells) - blocked
        if len(_connected(free, start, x, y)) == len(free):
            break
    else:
        raise InvalidSpec("could not place obstacles keeping the grid connected")
    rewards = sorted(rng.sample(sorted(free - {start}), r))
    init = [("at", start)] + [("reward", c) for c in rewards]
    init += [("unblocked", c) for c in cells if c in free]
    init += [("adjacent", a, b) for a, b in adj]
    goal = [("picked", c) for c in rewards]
    return _problem(spec.instance_id, "reward", [(cells, "cell")], init, goal)


def gen_visitall(spec, p, rng) -> str:
    x, y, frac = p["x"], p["y"], p["fraction"]
    if not 0 <= frac <= 1:
        raise InvalidSpec("fraction must be in [0, 1]")
    cells, adj = _grid(x, y)
    start = rng.choice(cells)
    n_goal = max(1, round(frac * len(cells))) if frac > 0 else 0
    goal_cells = sorted(rng.sample(cells, n_goal))
    init = [("at-robot", start), ("visited", start)] + [("connected", a, b) for a, b in adj]
    goal = [("visited", c) for c in goal_cells]
    return _problem(spec.instance_id, "grid-visit-all", [(cells, "place")], init, goal)


def _random_towers(blocks, rng):
    order = list(blocks)
    rng.shuffle(order)
    towers = []
    for b in order:
        if towers and rng.random() < 0.5:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def _split(order, k, rng):
    """Cut ``order`` into k nonempty consecutive pieces."""
    if k <= 1:
        return [order]
    cuts = sorted(rng.sample(range(1, len(order)), k - 1))
    return [order[a:b] for a, b in zip([0] + cuts, cuts + [len(order)])]


def gen_blocks(spec, p, rng) -> str:
    n, k = p["blocks"], p["towers"]
    if n > 0 and not 1 <= k <= n:
        raise InvalidSpec("towers must be between 1 and the number of blocks")
    blocks = [f"b{i}" for i in range(1, n + 1)]
    if k == 1:
        init_towers = [rng.sample(blocks, n)]
    else:
        init_towers = _random_towers(blocks, rng)
    init = [("handempty",)]
    for tower in init_towers:  # bottom first
        init.append(("ontable", tower[0]))
        init += [("on", b, a) for a, b in zip(tower, tower[1:])]
        init.append(("clear", tower[-1]))
    goal_towers = _split(rng.sample(blocks, n), k, rng) if n else []
    goal = []
    for tower in goal_towers:
        goal += [("on", b, a) for a, b in zip(tower, tower[1:])]
    return _problem(spec.instance_id, "blocks", [(blocks, "")], init, goal)


def gen_childsnack(spec, p, rng) -> str:
    n, ratio, trays, tables = p["children"], p["gluten"], p["trays"], p["tables"]
    if not 0 <= ratio <= 1:
        raise InvalidSpec("gluten ratio must be in [0, 1]")
    if n > 0 and (trays < 1 or tables < 1):
        raise InvalidSpec("need at least one tray and one table")
    children = [f"child{i}" for i in range(1, n + 1)]
    breads = [f"bread{i}" for i in range(1, n + 1)]
    contents = [f"content{i}" for i in range(1, n + 1)]
    sandwiches = [f"sandw{i}" for i in range(1, n + 1)]
    tray_names = [f"tray{i}" for i in range(1, trays + 1)]
    places = [f"table{i}" for i in range(1, tables + 1)]
    n_allergic = round(ratio * n)
    allergic = set(rng.sample(children, n_allergic))
    gf_bread = set(rng.sample(breads, n_allergic))
    gf_content = set(rng.sample(contents, n_allergic))
    init = [("at", t, "kitchen") for t in tray_names]
    init += [("at_kitchen_bread", b) for b in breads]
    init += [("at_kitchen_content", c) for c in contents]
    init += [("no_gluten_bread", b) for b in breads if b in gf_bread]
    init += [("no_gluten_content", c) for c in contents if c in gf_content]
    for c in children:
        init.append(("allergic_gluten", c) if c in allergic else ("not_allergic_gluten", c))
    for c in children:
        init.append(("waiting", c, rng.choice(places)))
    init += [("notexist", s) for s in sandwiches]
    goal = [("served", c) for c in children]
    return _problem(spec.instance_id, "child-snack",
                    [(children, "child"), (breads, "bread-portion"), (contents, "content-portion"),
                     (tray_names, "tray"), (places, "place"), (sandwiches, "sandwich")], init, goal)


_GENERATORS = {
    "delivery": gen_delivery,
    "gripper": gen_gripper,
    "spanner": gen_spanner,
    "miconic": gen_miconic,
    "reward": gen_reward,
    "visitall": gen_visitall,
    "blocks": gen_blocks,
    "childsnack": gen_childsnack,
}


# ---------------------------------------------------------------------------
# manifests

def suite_from_dict(data: dict) -> list[GenSpec]:
    """Expand a manifest into concrete specs.

    Format::

        {"seed": 0,
         "suites": [{"domain": "delivery",
                     "params": {"x": [3, 5], "y": [3, 5], "packages": [1, 2]},
                     "zip": ["x", "y"],
                     "instances": 1}]}

    List-valued params are crossed; names listed in ``zip`` vary together.
    Each instance gets a seed derived from the manifest seed and its index.
    """
    base_seed = int(data.get("seed", 0))
    specs: list[GenSpec] = []
    for si, suite in enumerate(data.get("suites", [])):
        try:
            domain = suite["domain"]
        except KeyError:
            raise InvalidSpec(f"suite {si} has no domain") from None
        params = suite.get("params", {})
        zipped = list(suite.get("zip", []))
        per = int(suite.get("instances", 1))
        as_list = {k: (v if isinstance(v, list) else [v]) for k, v in params.items()}
        if zipped:
            lens = {len(as_list[k]) for k in zipped}
            if len(lens) != 1:
                raise InvalidSpec(f"zipped parameters {zipped} have different lengths")
            zipped_rows = list(zip(*(as_list[k] for k in zipped)))
        else:
            zipped_rows = [()]
        free = [k for k in sorted(as_list) if k not in zipped]
        for zrow in zipped_rows:
            for frow in itertools.product(*(as_list[k] for k in free)):
                values = dict(zip(zipped, zrow))
                values.update(zip(free, frow))
                for r in range(per):
                    seed = base_seed * 1_000_003 + len(specs) * 7919 + r
                    specs.append(GenSpec.make(domain, seed=seed, **values))
    return specs


def suite(manifest_path) -> list[GenSpec]:
    with open(manifest_path) as f:
        return suite_from_dict(json.load(f))
