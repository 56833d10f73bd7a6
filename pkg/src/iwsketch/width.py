"""Iterated width search with novelty pruning.

``iw`` is a breadth-first search that drops every state beyond depth 1
that does not make some tuple of at most ``k`` atoms true for the first
time.  In closure mode it runs to exhaustion and the surviving states are
the IW(k)-reachable successors of the root.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .pddl import GroundedTask, State
from .statespace import is_goal

log = logging.getLogger(__name__)

MAX_WIDTH = 2


class NoveltyTable:
    """Atom tuples of size <= k seen so far in one search.

    For k=1 this is one bitmask.  For k=2 ``pairs[x]`` is the mask of atoms
    seen together with atom x (bit x itself marks the singleton).
    """

    def __init__(self, k: int, n_atoms: int):
        if k not in (1, 2):
            raise ValueError(f"novelty tables support k in {{1, 2}}, got {k}")
        self.k = k
        self.n_atoms = n_atoms
        self.seen = 0
        self.pairs = [0] * n_atoms if k == 2 else None

    def check(self, s: State, new: State | None = None) -> bool:
        """True if ``s`` has an unseen tuple; its tuples are then recorded.

        ``new`` optionally restricts the test to tuples that contain one of
        these atoms, which is exact when all other tuples of ``s`` are
        already recorded (e.g. ``new = child & ~parent``).
        """
        if self.k == 1:
            if s & ~self.seen:
                self.seen |= s
                return True
            return False
        pairs = self.pairs
        cand = s if new is None else new
        x = cand
        novel = False
        while x:
            low = x & -x
            if s & ~pairs[low.bit_length() - 1]:
                novel = True
                break
            x ^= low
        if not novel:
            return False
        self.seen |= s
        # every atom in cand learns all of s, every other atom learns cand
        x = s
        while x:
            low = x & -x
            i = low.bit_length() - 1
            if cand & low:
                pairs[i] |= s
            else:
                pairs[i] |= cand
            x ^= low
        return True

    def tuples(self) -> set[tuple[int, ...]]:
        """All recorded tuples, sorted; for tests and debugging."""
        out = set()
        for i in range(self.n_atoms):
            if (self.seen >> i) & 1:
                out.add((i,))
            if self.k == 2:
                m = self.pairs[i]
                for j in range(i + 1, self.n_atoms):
                    if (m >> j) & 1:
                        out.add((i, j))
        return out


def novelty_check(table: NoveltyTable, s: State) -> bool:
    return table.check(s)


class Closure(Mapping):
    """State -> action path, computed lazily from parent links."""

    def __init__(self, nodes: dict, root: State):
        self._nodes = nodes  # state -> (parent state, action, depth)
        self._root = root

    def __getitem__(self, s: State) -> tuple[int, ...]:
        if s == self._root or s not in self._nodes:
            raise KeyError(s)
        path = []
        nodes = self._nodes
        while s != self._root:
            parent, a, _ = nodes[s]
            path.append(a)
            s = parent
        return tuple(reversed(path))

    def __iter__(self) -> Iterator[State]:
        for s in self._nodes:
            if s != self._root:
                yield s

    def __len__(self) -> int:
        return len(self._nodes) - (1 if self._root in self._nodes else 0)

    def __contains__(self, s) -> bool:
        return s != self._root and s in self._nodes

    def depth(self, s: State) -> int:
        return self._nodes[s][2]


@dataclass
class IWResult:
    root: State
    found: tuple[State, tuple[int, ...]] | None
    closure: Closure
    expanded: int = 0
    generated: int = 0
    pruned: int = 0
    depth1: int = 0  # distinct children at depth 1
    k: int = 1
    stats: dict = field(default_factory=dict)

    def stats_line(self) -> str:
        return (f"iw k={self.k} expanded={self.expanded} generated={self.generated} "
                f"pruned={self.pruned} closure={len(self.closure)}")


def iw(task: GroundedTask, root: State, k: int,
       stop: Callable[[State], bool] | None = None, mode: str = "closure") -> IWResult:
    """Run IW(k) from ``root``.

    mode "first-hit" returns as soon as a generated state satisfies ``stop``
    (the root included); mode "closure" explores until the queue is empty.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"k must be 0, 1 or 2, got {k}")
    if mode not in ("closure", "first-hit"):
        raise ValueError(f"unknown mode {mode!r}")
    first_hit = mode == "first-hit"
    nodes = {root: (None, -1, 0)}
    res = IWResult(root, None, Closure(nodes, root), k=k)
    if first_hit and stop is not None and stop(root):
        res.found = (root, ())
        return res

    table = NoveltyTable(k, len(task.atoms)) if k else None
    if table is not None:
        table.check(root)
    check = table.check if table is not None else None
    by_atom, always = _successor_index(task)
    seen = {root}
    layer = [root]
    depth = 0
    while layer:
        depth += 1
        if k == 0 and depth > 1:
            break
        nxt = []
        for u in layer:
            res.expanded += 1
            # applicable actions in grounding order
            cands = list(always)
            x = u
            while x:
                low = x & -x
                for item in by_atom[low.bit_length() - 1]:
                    if u & item[1] == item[1]:
                        cands.append(item)
                x ^= low
            cands.sort()
            for a, _, keep, add in cands:
                v = (u & keep) | add
                if v in seen:
                    continue
                seen.add(v)
                res.generated += 1
                if first_hit and stop is not None and stop(v):
                    nodes[v] = (u, a, depth)
                    res.found = (v, res.closure[v])
                    return res
                if check is not None and not check(v, v & ~u) and depth > 1:
                    res.pruned += 1
                    continue
                if depth == 1:
                    res.depth1 += 1
                nodes[v] = (u, a, depth)
                nxt.append(v)
        layer = nxt
    if log.isEnabledFor(logging.DEBUG):
        log.debug(res.stats_line())
    return res


def _successor_index(task: GroundedTask):
    """(action, pre, keep, add) tuples indexed like ``task.triggers``."""
    cached = task.__dict__.get("_iw_index")
    if cached is None:
        by_atom, always = task.triggers
        acts = task.actions

        def item(i):
            a = acts[i]
            return (i, a.pre_mask, ~a.del_mask, a.add_mask)
        cached = (tuple(tuple(item(i) for i, _ in lst) for lst in by_atom),
                  tuple(item(i) for i, _ in always))
        task.__dict__["_iw_index"] = cached
    return cached


def nk_successors(task: GroundedTask, s: State, k: int) -> Closure:
    """States reachable from ``s`` via IW(k), with their BFS paths."""
    return iw(task, s, k, mode="closure").closure


def unachieved_goal_count(task: GroundedTask, s: State) -> int:
    return (task.goal_mask & ~s).bit_count()


def siw_classic(task: GroundedTask, k_max: int = 2, root: State | None = None) -> list[int] | None:
    """Serialized IW: chain IW searches that each lower the number of
    unachieved goal atoms, escalating k up to ``k_max``."""
    if k_max not in (1, 2):
        raise ValueError("k_max must be 1 or 2")
    s = task.init if root is None else root
    plan: list[int] = []
    while not is_goal(task, s):
        g = unachieved_goal_count(task, s)
        found = None
        for k in range(1, k_max + 1):
            res = iw(task, s, k, stop=lambda v, g=g: unachieved_goal_count(task, v) < g, mode="first-hit")
            if res.found is not None:
                found = res.found
                break
        if found is None:
            return None
        s, path = found
        plan.extend(path)
    return plan
