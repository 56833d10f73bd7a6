"""Benchmark harness: coverage / subgoal length / plan length / plan quality
over generated suites, validation scores, and subgoal-count curves."""

from __future__ import annotations

import csv
import io
import math
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .executor import ExecOptions, check_trace, siw_pi
from .generators import GenSpec, generate
from .pddl import GroundedTask, load_task
from .policy import SubgoalPolicy, UniformPolicy, load_policy, sketch_policy
from .sketch import builtin_ruleset, load_ruleset
from .statespace import MemoryCap, bfs_optimal, reachable_graph

CSV_VERSION = 1
RECORD_FIELDS = ["csv_version", "instance_id", "domain", "characteristic", "agents", "solved", "SL", "L",
                 "L_opt", "PQ", "seconds", "reason", "iw_calls", "max_closure", "novelty_bound_ok", "valid"]


@dataclass
class RunRecord:
    instance_id: str
    domain: str
    solved: bool
    SL: int
    L: int
    L_opt: int | None = None
    PQ: float | None = None
    seconds: float = 0.0
    reason: str = ""
    characteristic: int | None = None
    agents: int | None = None
    iw_calls: int = 0
    max_closure: int = 0
    novelty_bound_ok: bool = True
    valid: bool = False

    def row(self) -> dict:
        d = asdict(self)
        d["csv_version"] = CSV_VERSION
        return d


@dataclass
class Aggregate:
    instances: int
    coverage: float
    mean_SL: float | None
    mean_L: float | None
    PQ: float | None

    def display(self) -> dict:
        """Rounded view for reports; the CSV keeps raw values."""
        return {
            "instances": self.instances,
            "coverage": self.coverage,
            "SL": None if self.mean_SL is None else round(self.mean_SL),
            "L": None if self.mean_L is None else round(self.mean_L),
            "PQ": None if self.PQ is None else round(self.PQ, 2),
        }


@dataclass
class ValidationScore:
    ratio: float
    mean_length: float
    mean_optimal: float
    states: int
    solved: int
    metric: str = "primitive"

    def __float__(self):
        return self.ratio


def novelty_bound(task: GroundedTask, k: int) -> int:
    n = len(task.atoms)
    if k == 0:
        return 0
    if k == 1:
        return n
    return n + n * (n - 1) // 2


# ---------------------------------------------------------------------------
# policy sources

def resolve_policy(source: str, task: GroundedTask, ruleset_domain: str | None = None) -> SubgoalPolicy:
    """``sketch:R2`` / ``sketch:PATH.json`` / ``trained:PATH`` / ``uniform``."""
    if source == "uniform":
        return UniformPolicy()
    kind, _, arg = source.partition(":")
    if kind == "sketch" and arg:
        if arg.lower().endswith(".json"):
            return sketch_policy(load_ruleset(arg))
        return sketch_policy(builtin_ruleset(arg, ruleset_domain or task.domain_name))
    if kind == "trained" and arg:
        return load_policy(arg)
    raise ValueError(f"unknown policy source {source!r}")


# ---------------------------------------------------------------------------
# suites

def run_instance(task: GroundedTask, pol: SubgoalPolicy, opts: ExecOptions, instance_id: str = "",
                 oracle_cap: int | None = 200_000, spec: GenSpec | None = None) -> RunRecord:
    t0 = time.perf_counter()
    trace = siw_pi(task, pol, opts)
    seconds = time.perf_counter() - t0
    bound = novelty_bound(task, opts.k)
    ok = all(n <= bound + d1 for n, d1, _, _ in trace.iw_stats)
    L_opt = None
    if oracle_cap:
        try:
            L_opt = bfs_optimal(task, task.init, cap=oracle_cap)
        except MemoryCap:
            L_opt = None
    valid = check_trace(task, trace)
    rec = RunRecord(
        instance_id or task.name, task.domain_name, trace.solved, trace.subgoal_count, trace.primitive_length,
        L_opt, None, seconds, trace.reason, iw_calls=trace.calls,
        max_closure=max((n for n, *_ in trace.iw_stats), default=0), novelty_bound_ok=ok, valid=valid,
    )
    if spec is not None:
        rec.characteristic = spec.characteristic()
        rec.agents = spec.p.get("agents")
        rec.domain = spec.domain
    if trace.solved and L_opt:
        rec.PQ = rec.L / L_opt
    elif trace.solved and L_opt == 0:
        rec.PQ = 1.0
    return rec


def _run_spec(args) -> RunRecord:
    spec, source, opts, oracle_cap = args
    dom, prob = generate(spec)
    task = load_task(dom, prob)
    pol = resolve_policy(source, task, spec.domain) if isinstance(source, str) else source(task)
    return run_instance(task, pol, opts, spec.instance_id, oracle_cap, spec)


def run_suite(specs: Sequence[GenSpec], policy_source, opts: ExecOptions | None = None,
              oracle_cap: int | None = 200_000, jobs: int = 1) -> tuple[list[RunRecord], Aggregate]:
    """Run every spec.  ``policy_source`` is a source string (see
    ``resolve_policy``) or a callable task -> policy (single process only)."""
    opts = opts or ExecOptions()
    work = [(s, policy_source, opts, oracle_cap) for s in specs]
    if jobs > 1 and isinstance(policy_source, str) and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_run_spec, work))
    else:
        records = [_run_spec(w) for w in work]
    records.sort(key=lambda r: r.instance_id)
    return records, aggregate(records)


def aggregate(records: Sequence[RunRecord]) -> Aggregate:
    n = len(records)
    solved = [r for r in records if r.solved]
    if not n:
        return Aggregate(0, 0.0, None, None, None)
    mean_sl = sum(r.SL for r in solved) / len(solved) if solved else None
    mean_l = sum(r.L for r in solved) / len(solved) if solved else None
    with_opt = [r for r in solved if r.L_opt is not None]
    pq = None
    if with_opt:
        lo = sum(r.L_opt for r in with_opt)
        if lo > 0:
            pq = sum(r.L for r in with_opt) / lo
    return Aggregate(n, len(solved) / n, mean_sl, mean_l, pq)


def records_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=RECORD_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(v) for k, v in r.row().items()})
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def records_from_csv(text: str) -> list[RunRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        def num(key, cast):
            return None if row[key] == "" else cast(row[key])
        out.append(RunRecord(
            row["instance_id"], row["domain"], row["solved"] == "True", int(row["SL"]), int(row["L"]),
            num("L_opt", int), num("PQ", float), float(row["seconds"]), row["reason"],
            num("characteristic", int), num("agents", int), int(row["iw_calls"]), int(row["max_closure"]),
            row["novelty_bound_ok"] == "True", row["valid"] == "True",
        ))
    return out


def aggregate_csv(agg: Aggregate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["csv_version", "instances", "coverage", "mean_SL", "mean_L", "PQ"])
    w.writerow([CSV_VERSION, agg.instances, repr(agg.coverage), _fmt(agg.mean_SL), _fmt(agg.mean_L), _fmt(agg.PQ)])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# validation score

def _jump_distances(task: GroundedTask, graph, k: int, cache: dict) -> dict:
    """Fewest IW(k) jumps from each solvable state to a goal."""
    from .width import iw

    rev: dict = {}
    for i, s in enumerate(graph.states):
        if not graph.solvable[i] or i in graph.goals:
            continue
        res = cache.get(s)
        if res is None:
            res = cache[s] = iw(task, s, k, mode="closure")
        for c in res.closure:
            rev.setdefault(c, []).append(s)
    dist = {graph.states[g]: 0 for g in graph.goals}
    queue = deque(graph.states[g] for g in sorted(graph.goals))
    while queue:
        v = queue.popleft()
        for u in rev.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def validation_score(tasks: Sequence[GroundedTask], pol: SubgoalPolicy, opts: ExecOptions | None = None,
                     metric: str = "primitive", cap: int = 50_000,
                     caches: dict | None = None) -> ValidationScore:
    """Mean SIW_pi length over all alive states divided by the mean optimal
    length.  ``metric="primitive"`` compares action counts with BFS optima;
    ``metric="subgoal"`` compares IW(k) calls with the fewest possible.
    Any failed rollout makes the ratio infinite."""
    if metric not in ("primitive", "subgoal"):
        raise ValueError(f"unknown metric {metric!r}")
    opts = opts or ExecOptions()
    caches = {} if caches is None else caches
    total_l = total_opt = 0
    states = solved = 0
    for task in tasks:
        graph = reachable_graph(task, cap)
        cache = caches.setdefault(task.fingerprint, {})
        if metric == "subgoal":
            best = _jump_distances(task, graph, opts.k, cache)
        for i, s in enumerate(graph.states):
            if not graph.solvable[i] or i in graph.goals:
                continue
            states += 1
            tr = siw_pi(task, pol, opts, start=s, cache=cache)
            if tr.solved:
                solved += 1
            if metric == "primitive":
                total_l += tr.primitive_length
                total_opt += graph.goal_distance[i]
            else:
                total_l += tr.subgoal_count
                total_opt += best.get(s, 0)
    if not states:
        return ValidationScore(1.0, 0.0, 0.0, 0, 0, metric)
    ratio = total_l / total_opt if total_opt else 1.0
    if solved < states:
        ratio = math.inf
    return ValidationScore(ratio, total_l / states, total_opt / states, states, solved, metric)


# ---------------------------------------------------------------------------
# curves

@dataclass
class CurvePoint:
    instance_id: str
    x: int
    y: int
    agents: int | None
    solved: bool


def subgoal_curve(domain: str, sweep: Sequence[GenSpec], policy_source, opts: ExecOptions | None = None,
                  count_agents: bool = False) -> list[CurvePoint]:
    """Subgoal count per instance against its characteristic object count.
    With ``count_agents`` the x value adds the number of agents."""
    rows = []
    for spec in sweep:
        if spec.domain != domain:
            raise ValueError(f"spec {spec.instance_id} is not a {domain} instance")
        rec = _run_spec((spec, policy_source, opts or ExecOptions(), None))
        agents = spec.p.get("agents")
        x = spec.characteristic() + ((agents or 0) if count_agents else 0)
        rows.append(CurvePoint(spec.instance_id, x, rec.SL, agents, rec.solved))
    return rows


def curve_csv(points: Iterable[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["csv_version", "instance_id", "x", "y", "agents", "solved"])
    for p in points:
        w.writerow([CSV_VERSION, p.instance_id, p.x, p.y, "" if p.agents is None else p.agents, p.solved])
    return buf.getvalue()
