"""SIW with a subgoal policy: repeatedly run IW(k) to completion, let the
policy pick one state of the closure, and jump there along the stored path.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field

from .pddl import GroundedTask, State, format_atom
from .policy import PolicyError, SubgoalPolicy, select_greedy, select_stochastic
from .statespace import is_goal, validate
from .width import iw


@dataclass
class ExecOptions:
    k: int = 1
    cycle_prevention: bool = False
    max_calls: int | None = None  # default 4 * (|goal| + 1)
    selection: str = "greedy"
    seed: int = 0

    def __post_init__(self):
        if self.k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        if self.selection not in ("greedy", "stochastic"):
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.max_calls is not None and self.max_calls < 0:
            raise ValueError("max_calls must be >= 0")

    def call_limit(self, task: GroundedTask) -> int:
        if self.max_calls is not None:
            return self.max_calls
        return 4 * (len(task.goal) + 1)


@dataclass
class Segment:
    subgoal: State
    path: tuple[int, ...]


@dataclass
class Trace:
    start: State
    segments: list[Segment] = field(default_factory=list)
    solved: bool = False
    reason: str = ""  # "" | max-calls | no-candidates | policy-failure
    calls: int = 0
    iw_stats: list = field(default_factory=list)  # (generated-not-pruned, depth1, expanded, pruned)
    seconds: float = 0.0

    @property
    def primitive_length(self) -> int:
        return sum(len(s.path) for s in self.segments)

    @property
    def subgoal_count(self) -> int:
        return len(self.segments)

    @property
    def end(self) -> State:
        return self.segments[-1].subgoal if self.segments else self.start


def siw_pi(task: GroundedTask, pol: SubgoalPolicy, opts: ExecOptions | None = None,
           start: State | None = None, cache: dict | None = None) -> Trace:
    """Run SIW with policy ``pol``.  Failures are reported in the trace.

    ``cache`` may map states to previously computed IW results and is
    filled in as the run goes (useful when rolling out from many states).
    """
    opts = opts or ExecOptions()
    s = task.init if start is None else start
    trace = Trace(s)
    rng = random.Random(opts.seed)
    select = select_greedy if opts.selection == "greedy" else select_stochastic
    limit = opts.call_limit(task)
    selected: set[State] = set()
    t0 = time.perf_counter()
    while not is_goal(task, s):
        if trace.calls >= limit:
            trace.reason = "max-calls"
            break
        res = cache.get(s) if cache is not None else None
        if res is None:
            res = iw(task, s, opts.k, mode="closure")
            if cache is not None:
                cache[s] = res
        trace.calls += 1
        closure = res.closure
        trace.iw_stats.append((len(closure), res.depth1, res.expanded, res.pruned))
        if not len(closure):
            trace.reason = "no-candidates"
            break
        excl = selected if opts.cycle_prevention else ()
        if excl and all(c in excl for c in closure):
            trace.reason = "no-candidates"
            break
        try:
            nxt = select(pol, task, s, closure, excl, rng)
        except PolicyError:
            trace.reason = "policy-failure"
            break
        trace.segments.append(Segment(nxt, closure[nxt]))
        selected.add(nxt)
        s = nxt
    else:
        trace.solved = True
    trace.seconds = time.perf_counter() - t0
    return trace


def flatten(trace: Trace) -> list[int]:
    plan: list[int] = []
    for seg in trace.segments:
        plan.extend(seg.path)
    return plan


def check_trace(task: GroundedTask, trace: Trace) -> bool:
    """A solved trace's flattened plan must be a valid plan."""
    if not trace.solved:
        return False
    return validate(task, trace.start, flatten(trace))[0]


def emit_trace(trace: Trace, task: GroundedTask) -> str:
    lines = [f"Primitive plan: {trace.primitive_length}", f"Plan: {trace.subgoal_count}"]
    for i, seg in enumerate(trace.segments, 1):
        lines.append(f"{i} " + " -> ".join(task.actions[a].label() for a in seg.path))
    return "\n".join(lines) + "\n"


def trace_to_json(trace: Trace, task: GroundedTask) -> dict:
    return {
        "task": task.name,
        "domain": task.domain_name,
        "start": [format_atom(a) for a in task.state_atoms(trace.start)],
        "solved": trace.solved,
        "reason": trace.reason or None,
        "primitive_length": trace.primitive_length,
        "subgoal_count": trace.subgoal_count,
        "iw_calls": trace.calls,
        "segments": [
            {
                "actions": [task.actions[a].label() for a in seg.path],
                "subgoal": [format_atom(a) for a in task.state_atoms(seg.subgoal)],
            }
            for seg in trace.segments
        ],
    }


def dump_trace_json(trace: Trace, task: GroundedTask) -> str:
    return json.dumps(trace_to_json(trace, task), indent=1)
