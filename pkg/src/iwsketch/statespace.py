"""Transition semantics, plan validation and exhaustive oracles."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .pddl import GroundedTask, State, state_indices

DEFAULT_STATE_CAP = 5 * 10**6


class Inapplicable(Exception):
    pass


class MemoryCap(Exception):
    pass


class StateSpaceTooLarge(Exception):
    pass


def applicable(task: GroundedTask, s: State) -> list[int]:
    """Indices of the actions applicable in ``s``, in grounding order."""
    by_atom, always = task.triggers
    out = [i for i, _ in always]
    x = s
    while x:
        low = x & -x
        for idx, pm in by_atom[low.bit_length() - 1]:
            if s & pm == pm:
                out.append(idx)
        x ^= low
    out.sort()
    return out


def apply(task: GroundedTask, s: State, a: int) -> State:
    act = task.actions[a]
    if s & act.pre_mask != act.pre_mask:
        raise Inapplicable(f"{act.label()} is not applicable")
    return (s & ~act.del_mask) | act.add_mask


def is_goal(task: GroundedTask, s: State) -> bool:
    gm = task.goal_mask
    return s & gm == gm


def successors(task: GroundedTask, s: State) -> list[tuple[int, State]]:
    acts = task.actions
    return [(a, (s & ~acts[a].del_mask) | acts[a].add_mask) for a in applicable(task, s)]


def bfs_optimal(task: GroundedTask, s: State, horizon: int | None = None,
                cap: int = DEFAULT_STATE_CAP) -> int | None:
    """Length of a shortest plan from ``s``, or None if there is none within
    ``horizon`` steps."""
    if is_goal(task, s):
        return 0
    if horizon is not None and horizon <= 0:
        return None
    dist = {s: 0}
    frontier = [s]
    depth = 0
    while frontier:
        depth += 1
        if horizon is not None and depth > horizon:
            return None
        nxt = []
        for u in frontier:
            for _, v in successors(task, u):
                if v in dist:
                    continue
                if is_goal(task, v):
                    return depth
                dist[v] = depth
                if len(dist) > cap:
                    raise MemoryCap(f"explored more than {cap} states")
                nxt.append(v)
        frontier = nxt
    return None


def bfs_plan(task: GroundedTask, s: State, cap: int = DEFAULT_STATE_CAP) -> list[int] | None:
    """A shortest plan as action indices."""
    if is_goal(task, s):
        return []
    parent: dict[State, tuple[State, int] | None] = {s: None}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for a, v in successors(task, u):
            if v in parent:
                continue
            parent[v] = (u, a)
            if is_goal(task, v):
                plan = []
                while parent[v] is not None:
                    v, a = parent[v]
                    plan.append(a)
                return plan[::-1]
            if len(parent) > cap:
                raise MemoryCap(f"explored more than {cap} states")
            queue.append(v)
    return None


@dataclass
class StateGraph:
    """Explicit reachable graph of a task."""

    states: list[State]
    index: dict
    edges: list[list[int]]  # successor state ids (deduplicated, sorted)
    goals: set[int]
    solvable: list[bool]
    goal_distance: list  # int or None

    def alive(self) -> set[State]:
        return {s for i, s in enumerate(self.states) if self.solvable[i] and i not in self.goals}

    def dead_ends(self) -> set[State]:
        return {s for i, s in enumerate(self.states) if not self.solvable[i]}


def reachable_graph(task: GroundedTask, cap: int = 50_000, root: State | None = None) -> StateGraph:
    """Enumerate all states reachable from ``root`` (default init) and label
    dead ends by backward reachability from the goal states."""
    root = task.init if root is None else root
    index = {root: 0}
    states = [root]
    edges: list[list[int]] = []
    i = 0
    while i < len(states):
        succ = set()
        for _, v in successors(task, states[i]):
            j = index.get(v)
            if j is None:
                j = len(states)
                if j >= cap:
                    raise StateSpaceTooLarge(f"more than {cap} reachable states")
                index[v] = j
                states.append(v)
            succ.add(j)
        edges.append(sorted(succ))
        i += 1
    goals = {j for j, s in enumerate(states) if is_goal(task, s)}
    rev: list[list[int]] = [[] for _ in states]
    for u, vs in enumerate(edges):
        for v in vs:
            rev[v].append(u)
    dist: list = [None] * len(states)
    queue = deque(sorted(goals))
    for g in goals:
        dist[g] = 0
    while queue:
        v = queue.popleft()
        for u in rev[v]:
            if dist[u] is None:
                dist[u] = dist[v] + 1
                queue.append(u)
    solvable = [d is not None for d in dist]
    return StateGraph(states, index, edges, goals, solvable, dist)


def enumerate_alive(task: GroundedTask, cap: int = 50_000) -> set[State]:
    """Reachable, solvable, non-goal states."""
    return reachable_graph(task, cap).alive()


def validate(task: GroundedTask, s0: State, plan: Sequence[int]) -> tuple[bool, int | None]:
    """Execute ``plan`` from ``s0``.  Returns (ok, index of the first failing
    step); a plan that runs but misses the goal fails at ``len(plan)``."""
    s = s0
    for i, a in enumerate(plan):
        act = task.actions[a]
        if s & act.pre_mask != act.pre_mask:
            return False, i
        s = (s & ~act.del_mask) | act.add_mask
    if not is_goal(task, s):
        return False, len(plan)
    return True, None


def execute(task: GroundedTask, s0: State, plan: Iterable[int]) -> State:
    s = s0
    for a in plan:
        s = apply(task, s, a)
    return s


def parse_plan(task: GroundedTask, text: str) -> list[int]:
    """Read a plan file with one ``(name obj ...)`` action per line.  Lines
    starting with ';' are comments."""
    lookup = {(a.name,) + a.args: i for i, a in enumerate(task.actions)}
    plan = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        key = tuple(line.strip("()").lower().split())
        if key not in lookup:
            raise ValueError(f"line {lineno}: unknown action {line}")
        plan.append(lookup[key])
    return plan


def format_plan(task: GroundedTask, plan: Iterable[int]) -> str:
    return "".join(task.actions[a].pddl() + "\n" for a in plan)


__all__ = [
    "Inapplicable", "MemoryCap", "StateSpaceTooLarge", "StateGraph",
    "applicable", "apply", "is_goal", "successors", "bfs_optimal", "bfs_plan",
    "reachable_graph", "enumerate_alive", "validate", "execute", "parse_plan",
    "format_plan", "state_indices",
]
