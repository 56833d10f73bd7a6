"""Subgoal policies over IW(k)-reachable successor sets.

A policy maps a state s and a candidate set (normally the IW(k) closure of
s) to a distribution over the candidates.  Three kinds are provided: a
sketch policy that spreads mass over the closest states satisfying a
ruleset, a uniform policy, and a tabular softmax policy trained with a
one-step actor-critic whose cost is one unit per subgoal jump.
"""

from __future__ import annotations

import json
import math
import random
import time
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

from .pddl import GroundedTask, State
from .sketch import Ruleset
from .statespace import reachable_graph
from .width import Closure, nk_successors

LOGIT_CLIP = 30.0
TIE_EPS = 1e-12
POLICY_FORMAT = "iwsketch-policy"
POLICY_VERSION = 1


class PolicyError(Exception):
    pass


class EmptyCandidateSet(PolicyError):
    pass


class AllCandidatesExcluded(PolicyError):
    pass


class NoSubgoalInCandidates(PolicyError):
    pass


class NoAliveStates(Exception):
    pass


@dataclass
class PolicyConfig:
    gamma: float = 0.999
    alpha: float = 2e-4
    beta: float | None = None  # defaults to alpha
    iterations: int = 100_000
    seed: int = 0
    k: int = 1
    prior: str = "uniform-alive"  # or "init-only"
    optimizer: str = "sgd"  # or "adam"
    dead_end_value: float | None = None  # defaults to 1 / (1 - gamma)
    state_cap: int = 50_000
    eval_every: int = 0  # 0 disables early stopping
    early_stop_ratio: float | None = None
    cpu_budget: float | None = None  # seconds of process CPU time, validation included
    engine: str = "auto"  # "python", "numba" or "auto" (numba when importable)

    def __post_init__(self):
        if self.beta is None:
            self.beta = self.alpha
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("step sizes must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        if self.prior not in ("uniform-alive", "init-only"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.engine not in ("auto", "python", "numba"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.cpu_budget is not None and self.cpu_budget <= 0:
            raise ValueError("cpu_budget must be positive")

    @property
    def dead_end_cost(self) -> float:
        if self.dead_end_value is not None:
            return self.dead_end_value
        return 1.0 / (1.0 - self.gamma) if self.gamma < 1 else 1e4


# ---------------------------------------------------------------------------
# softmax helpers

def clip(x: float) -> float:
    return LOGIT_CLIP if x > LOGIT_CLIP else (-LOGIT_CLIP if x < -LOGIT_CLIP else x)


def softmax(logits: Sequence[float]) -> list[float]:
    if not logits:
        raise EmptyCandidateSet("softmax over an empty candidate set")
    xs = [clip(x) for x in logits]
    m = max(xs)
    ex = [math.exp(x - m) for x in xs]
    z = sum(ex)
    return [e / z for e in ex]


def grad_log_softmax(logits: Sequence[float], chosen: int) -> list[float]:
    """d log softmax(logits)[chosen] / d logits (unclipped region)."""
    p = softmax(logits)
    return [(1.0 if i == chosen else 0.0) - pi for i, pi in enumerate(p)]


def actor_step(logits: list[float], chosen: int, delta: float, alpha: float) -> list[float]:
    """Tabular actor update theta <- theta - alpha * delta * grad log pi."""
    p = softmax(logits)
    out = list(logits)
    for i, pi in enumerate(p):
        if i == chosen:
            out[i] = clip(out[i] - alpha * delta * (1.0 - pi))
        else:
            out[i] = clip(out[i] + alpha * delta * pi)
    return out


# ---------------------------------------------------------------------------
# policies

def _candidate_list(candidates) -> list[State]:
    if isinstance(candidates, Mapping):
        return list(candidates.keys())
    return list(candidates)


class SubgoalPolicy:
    def distribution(self, task: GroundedTask, s: State, candidates) -> dict[State, float]:
        raise NotImplementedError


class UniformPolicy(SubgoalPolicy):
    def distribution(self, task, s, candidates):
        cands = _candidate_list(candidates)
        if not cands:
            raise EmptyCandidateSet("no candidates")
        p = 1.0 / len(cands)
        return {c: p for c in cands}

    def describe(self) -> str:
        return "uniform"


class SketchPolicy(SubgoalPolicy):
    """Uniform over the closest candidates that satisfy some rule.

    Distances come from the candidate mapping: an IW closure knows each
    state's depth, a plain dict may map state -> distance.  Without
    distance information every satisfying candidate gets equal mass.
    """

    def __init__(self, ruleset: Ruleset, closest: bool = True):
        self.ruleset = ruleset
        self.closest = closest
        self._per_task: dict = {}
        self._match = ruleset.matcher()

    def _evaluator(self, task):
        ev = self._per_task.get(id(task))
        if ev is None or ev[0] is not task:
            ev = self._per_task[id(task)] = (task, self.ruleset.evaluator(task))
        return ev[1]

    def subgoals(self, task, s, candidates) -> list[State]:
        ev = self._evaluator(task)
        v1 = ev(s)
        match = self._match
        return [c for c in _candidate_list(candidates) if match(v1, ev(c)) is not None]

    def distribution(self, task, s, candidates):
        if not len(candidates):
            raise EmptyCandidateSet("no candidates")
        hits = self.subgoals(task, s, candidates)
        if not hits:
            raise NoSubgoalInCandidates(f"no candidate satisfies {self.ruleset.name}")
        if self.closest:
            dist = _distance_fn(candidates)
            if dist is not None:
                d = {c: dist(c) for c in hits}
                best = min(d.values())
                hits = [c for c in hits if d[c] == best]
        p = 1.0 / len(hits)
        return {c: p for c in hits}

    def describe(self) -> str:
        return f"sketch:{self.ruleset.name}"


def _distance_fn(candidates):
    if isinstance(candidates, Closure):
        return candidates.depth
    if isinstance(candidates, Mapping):
        sample = next(iter(candidates.values()), None)
        if isinstance(sample, int):
            return candidates.__getitem__
        if isinstance(sample, (tuple, list)):
            return lambda c: len(candidates[c])
    return None


@dataclass
class TabularPolicy(SubgoalPolicy):
    """Softmax over per-state logit tables; states are keyed by
    (task fingerprint, state bitmask)."""

    logits: dict = field(default_factory=dict)  # key -> {succ state: logit}
    values: dict = field(default_factory=dict)  # key -> V
    config: dict = field(default_factory=dict)
    seed: int = 0
    tasks: list = field(default_factory=list)  # fingerprints
    meta: dict = field(default_factory=dict)

    @staticmethod
    def key(task: GroundedTask, s: State) -> tuple[str, State]:
        return (task.fingerprint, s)

    def distribution(self, task, s, candidates):
        cands = _candidate_list(candidates)
        if not cands:
            raise EmptyCandidateSet("no candidates")
        row = self.logits.get(self.key(task, s), {})
        probs = softmax([row.get(c, 0.0) for c in cands])
        return dict(zip(cands, probs))

    def value(self, task, s) -> float:
        return self.values.get(self.key(task, s), 0.0)

    def describe(self) -> str:
        return "trained"


def policy_distribution(pol: SubgoalPolicy, task: GroundedTask, s: State, candidates) -> dict[State, float]:
    return pol.distribution(task, s, candidates)


def _allowed(candidates, exclusions):
    if not exclusions:
        return candidates
    if isinstance(candidates, Closure):
        return {c: candidates.depth(c) for c in candidates if c not in exclusions}
    if isinstance(candidates, Mapping):
        return {c: v for c, v in candidates.items() if c not in exclusions}
    return [c for c in candidates if c not in exclusions]


def select_greedy(pol: SubgoalPolicy, task: GroundedTask, s: State, candidates,
                  exclusions: Iterable[State] = (), rng: random.Random | None = None) -> State:
    """Most probable allowed candidate; ties broken by ``rng``."""
    if not len(candidates):
        raise EmptyCandidateSet("no candidates")
    allowed = _allowed(candidates, set(exclusions))
    if not len(allowed):
        raise AllCandidatesExcluded("every candidate is excluded")
    dist = pol.distribution(task, s, allowed)
    best = max(dist.values())
    ties = sorted(c for c, p in dist.items() if p >= best - TIE_EPS)
    if len(ties) == 1:
        return ties[0]
    rng = rng or random.Random(0)
    return ties[rng.randrange(len(ties))]


def select_stochastic(pol: SubgoalPolicy, task: GroundedTask, s: State, candidates,
                      exclusions: Iterable[State] = (), rng: random.Random | None = None) -> State:
    if not len(candidates):
        raise EmptyCandidateSet("no candidates")
    allowed = _allowed(candidates, set(exclusions))
    if not len(allowed):
        raise AllCandidatesExcluded("every candidate is excluded")
    dist = pol.distribution(task, s, allowed)
    items = sorted(dist.items())
    total = sum(p for _, p in items)
    rng = rng or random.Random(0)
    r = rng.random() * total
    acc = 0.0
    for c, p in items:
        acc += p
        if r < acc:
            return c
    return items[-1][0]


def sketch_policy(ruleset: Ruleset, closest: bool = True) -> SketchPolicy:
    return SketchPolicy(ruleset, closest)


# ---------------------------------------------------------------------------
# training

class _TaskTables:
    """Per-task training data: state ids from the reachable graph, memoized
    IW(k) successor lists, and flat logit/value arrays."""

    def __init__(self, task: GroundedTask, k: int, cap: int):
        self.task = task
        self.k = k
        self.graph = reachable_graph(task, cap)
        g = self.graph
        self.alive = [i for i in range(len(g.states)) if g.solvable[i] and i not in g.goals]
        self.is_goal = [False] * len(g.states)
        for i in g.goals:
            self.is_goal[i] = True
        self.values = [0.0] * len(g.states)
        self.cands: dict[int, list[int]] = {}
        self.logits: dict[int, list[float]] = {}
        self.init_id = g.index[task.init]

    def candidates(self, sid: int) -> list[int]:
        c = self.cands.get(sid)
        if c is None:
            closure = nk_successors(self.task, self.graph.states[sid], self.k)
            idx = self.graph.index
            c = self.cands[sid] = [idx[s] for s in closure]
            self.logits[sid] = [0.0] * len(c)
        return c


def train_actor_critic(tasks: Sequence[GroundedTask], cfg: PolicyConfig,
                       validate: Callable[[TabularPolicy], float] | None = None,
                       progress: Callable[[int, dict], None] | None = None) -> TabularPolicy:
    """One-step actor-critic over IW(k) successor sets, tabular parameters.

    Each iteration samples a task uniformly, a non-goal alive state S from
    the prior, a successor S' from pi(.|S) over N_k(S), and applies
    delta = 1 + gamma V(S') - V(S); V(S) += beta delta; the softmax actor
    step; and V(S') -= beta V(S') when S' is a goal.  Dead-end successors
    have a fixed value ``cfg.dead_end_cost``.

    ``validate`` (policy -> score) is called every ``cfg.eval_every``
    iterations when set; training stops once the score is at most
    ``cfg.early_stop_ratio``.  ``cfg.cpu_budget`` caps process CPU time.
    """
    if not tasks:
        raise NoAliveStates("no training tasks")
    tables = [_TaskTables(t, cfg.k, cfg.state_cap) for t in tasks]
    if cfg.prior == "init-only":
        pools = [[tt.init_id] if tt.init_id in set(tt.alive) else [] for tt in tables]
    else:
        pools = [tt.alive for tt in tables]
    usable = [i for i, p in enumerate(pools) if p]
    if not usable:
        raise NoAliveStates("no alive states in any training task")

    history: list = []
    started = time.perf_counter()
    cpu0 = time.process_time()

    def evaluate(it) -> bool:
        """Report progress; True when the early-stop score is reached."""
        info = {"iteration": it, "seconds": time.perf_counter() - started}
        if validate is None:
            if progress:
                progress(it, info)
            return False
        score = validate(_export(tables, cfg))
        info["validation"] = score
        history.append((it, score))
        if progress:
            progress(it, info)
        return cfg.early_stop_ratio is not None and score <= cfg.early_stop_ratio

    def finish(it, stopped_early, out_of_budget) -> TabularPolicy:
        pol = _export(tables, cfg)
        pol.meta = {"iterations_run": it, "stopped_early": stopped_early, "out_of_budget": out_of_budget,
                    "history": history, "seconds": time.perf_counter() - started,
                    "cpu_seconds": time.process_time() - cpu0, "engine": engine}
        return pol

    engine = _pick_engine(cfg.engine)
    if engine == "numba":
        it, stopped_early, out_of_budget = _run_numba(tables, pools, usable, cfg, evaluate, cpu0)
        return finish(it, stopped_early, out_of_budget)

    rng = random.Random(cfg.seed)
    gamma, alpha, beta = cfg.gamma, cfg.alpha, cfg.beta
    dead_v = cfg.dead_end_cost
    adam = cfg.optimizer == "adam"
    b1, b2, eps = 0.9, 0.999, 1e-8
    moments: dict = {}
    step_count = 0
    budget = cfg.cpu_budget
    it = 0
    stopped_early = out_of_budget = False
    exp = math.exp

    while it < cfg.iterations:
        if budget is not None and it % 1024 == 0 and time.process_time() - cpu0 > budget:
            out_of_budget = True
            break
        it += 1
        ti = usable[rng.randrange(len(usable))] if len(usable) > 1 else usable[0]
        tt = tables[ti]
        pool = pools[ti]
        sid = pool[rng.randrange(len(pool))]
        cands = tt.candidates(sid)
        row = tt.logits[sid]
        # softmax with clipping
        m = max(row)
        ex = [exp(x - m) for x in row]
        z = sum(ex)
        r = rng.random() * z
        acc = 0.0
        j = len(ex) - 1
        for idx, e in enumerate(ex):
            acc += e
            if r < acc:
                j = idx
                break
        nxt = cands[j]
        solvable = tt.graph.solvable[nxt]
        v_next = tt.values[nxt] if solvable else dead_v
        delta = 1.0 + gamma * v_next - tt.values[sid]
        if not adam:
            tt.values[sid] += beta * delta
            for idx, e in enumerate(ex):
                p = e / z
                x = row[idx] - alpha * delta * ((1.0 if idx == j else 0.0) - p)
                row[idx] = LOGIT_CLIP if x > LOGIT_CLIP else (-LOGIT_CLIP if x < -LOGIT_CLIP else x)
            if tt.is_goal[nxt]:
                tt.values[nxt] -= beta * tt.values[nxt]
        else:
            step_count += 1
            c1 = 1 - b1 ** step_count
            c2 = 1 - b2 ** step_count

            def adam_step(key, grad, lr):
                mv = moments.get(key)
                if mv is None:
                    mv = moments[key] = [0.0, 0.0]
                mv[0] = b1 * mv[0] + (1 - b1) * grad
                mv[1] = b2 * mv[1] + (1 - b2) * grad * grad
                return lr * (mv[0] / c1) / (math.sqrt(mv[1] / c2) + eps)

            tt.values[sid] -= adam_step(("v", ti, sid), -delta, beta)
            for idx, e in enumerate(ex):
                p = e / z
                g = delta * ((1.0 if idx == j else 0.0) - p)
                row[idx] = clip(row[idx] - adam_step(("t", ti, sid, idx), g, alpha))
            if tt.is_goal[nxt]:
                tt.values[nxt] -= adam_step(("v", ti, nxt), tt.values[nxt], beta)

        if cfg.eval_every and it % cfg.eval_every == 0 and evaluate(it):
            stopped_early = True
            break

    return finish(it, stopped_early, out_of_budget)


def _pick_engine(name: str) -> str:
    if name == "python":
        return name
    try:
        from . import _fastac  # noqa: F401
    except ImportError:
        if name == "numba":
            raise
        return "python"
    return "numba"


def _run_numba(tables, pools, usable, cfg: PolicyConfig, evaluate, cpu0) -> tuple[int, bool, bool]:
    import numpy as np

    from . import _fastac

    offsets, total = [], 0
    for tt in tables:
        offsets.append(total)
        total += len(tt.graph.states)
    lengths = np.zeros(total, np.int64)
    for ti in usable:
        for sid in pools[ti]:
            lengths[offsets[ti] + sid] = len(tables[ti].candidates(sid))
    ptr = np.zeros(total + 1, np.int64)
    ptr[1:] = np.cumsum(lengths)
    cand = np.zeros(int(ptr[-1]), np.int64)
    for ti in usable:
        off = offsets[ti]
        for sid in pools[ti]:
            cand[ptr[off + sid]:ptr[off + sid + 1]] = [off + c for c in tables[ti].cands[sid]]
    is_goal = np.array([g for tt in tables for g in tt.is_goal], np.bool_)
    solvable = np.array([bool(x) for tt in tables for x in tt.graph.solvable], np.bool_)
    pool = np.array([offsets[ti] + sid for ti in usable for sid in pools[ti]], np.int64)
    pool_ptr = np.zeros(len(usable) + 1, np.int64)
    pool_ptr[1:] = np.cumsum([len(pools[ti]) for ti in usable])
    logits = np.zeros(len(cand))
    values = np.zeros(total)
    adam = cfg.optimizer == "adam"
    m_l, v_l = np.zeros(len(cand) if adam else 0), np.zeros(len(cand) if adam else 0)
    m_v, v_v = np.zeros(total if adam else 0), np.zeros(total if adam else 0)

    def write_back():
        for ti, tt in enumerate(tables):
            off = offsets[ti]
            tt.values = values[off:off + len(tt.graph.states)].tolist()
            for sid in tt.cands:
                tt.logits[sid] = logits[ptr[off + sid]:ptr[off + sid + 1]].tolist()

    _fastac.seed(cfg.seed & 0xFFFFFFFF)
    chunk = 1 << 20
    it, step = 0, 0
    stopped_early = out_of_budget = False
    while it < cfg.iterations:
        if cfg.cpu_budget is not None and time.process_time() - cpu0 > cfg.cpu_budget:
            out_of_budget = True
            break
        n = min(chunk, cfg.iterations - it)
        if cfg.eval_every:
            n = min(n, cfg.eval_every - it % cfg.eval_every)
        step = _fastac.run(n, pool_ptr, pool, ptr, cand, logits, values, is_goal, solvable, cfg.gamma, cfg.alpha,
                           cfg.beta, cfg.dead_end_cost, LOGIT_CLIP, adam, m_l, v_l, m_v, v_v, step)
        it += n
        if cfg.eval_every and it % cfg.eval_every == 0:
            write_back()
            if evaluate(it):
                stopped_early = True
                break
    write_back()
    return it, stopped_early, out_of_budget


def _export(tables: list[_TaskTables], cfg: PolicyConfig) -> TabularPolicy:
    logits: dict = {}
    values: dict = {}
    for tt in tables:
        fp = tt.task.fingerprint
        states = tt.graph.states
        for sid, row in tt.logits.items():
            cands = tt.cands[sid]
            logits[(fp, states[sid])] = {states[c]: x for c, x in zip(cands, row)}
        for sid, v in enumerate(tt.values):
            if v != 0.0:
                values[(fp, states[sid])] = v
    return TabularPolicy(logits, values, asdict(cfg), cfg.seed, [tt.task.fingerprint for tt in tables])


# ---------------------------------------------------------------------------
# persistence

def save_policy(pol: TabularPolicy, path) -> None:
    def k(key):
        return f"{key[0]}:{key[1]:x}"

    data = {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "seed": pol.seed,
        "config": pol.config,
        "tasks": pol.tasks,
        "logits": {k(key): {f"{s:x}": v for s, v in row.items()} for key, row in pol.logits.items()},
        "values": {k(key): v for key, v in pol.values.items()},
    }
    with open(path, "w") as f:
        json.dump(data, f, sort_keys=True)


def load_policy(path) -> TabularPolicy:
    with open(path) as f:
        data = json.load(f)
    if data.get("format") != POLICY_FORMAT:
        raise ValueError(f"{path} is not a policy file")
    if data.get("version") != POLICY_VERSION:
        raise ValueError(f"unsupported policy version {data.get('version')}")

    def k(text):
        fp, s = text.rsplit(":", 1)
        return (fp, int(s, 16))

    logits = {k(key): {int(s, 16): v for s, v in row.items()} for key, row in data["logits"].items()}
    values = {k(key): v for key, v in data["values"].items()}
    return TabularPolicy(logits, values, data.get("config", {}), data.get("seed", 0), data.get("tasks", []))
