"""Independent reference implementations used by the tests.

Nothing here reuses the search code under test: distances come from plain
breadth-first search over explicit successor lists, and width is checked
by brute force over all atom tuples of size <= k.
"""

from __future__ import annotations

from collections import deque
from itertools import combinations
from pathlib import Path

from iwsketch.generators import GenSpec, generate
from iwsketch.pddl import load_task

FIXTURES = Path(__file__).parent / "fixtures"


def gen_task(domain, seed=0, **params):
    return load_task(*generate(GenSpec.make(domain, seed=seed, **params)))


def fixture_task(domain, problem_file, **kw):
    from iwsketch.generators import domain_text
    return load_task(domain_text(domain), (FIXTURES / problem_file).read_text(), **kw)


DELIVERY_1x2 = """
(define (problem delivery-1x2)
  (:domain delivery)
  (:objects c0 c1 - cell t1 - truck p1 - package)
  (:init (adjacent c0 c1) (adjacent c1 c0) (at t1 c0) (at p1 c0) (empty t1))
  (:goal (and (at p1 c1))))
"""


def delivery_1x2(**kw):
    from iwsketch.generators import domain_text
    return load_task(domain_text("delivery"), DELIVERY_1x2, **kw)


def gripper_problem(n):
    balls = " ".join(f"ball{i}" for i in range(1, n + 1))
    init = " ".join(f"(ball ball{i}) (at ball{i} rooma)" for i in range(1, n + 1))
    goal = " ".join(f"(at ball{i} roomb)" for i in range(1, n + 1))
    return f"""
(define (problem gripper-{n})
  (:domain gripper)
  (:objects rooma roomb left right {balls})
  (:init (room rooma) (room roomb) (gripper left) (gripper right) (at-robby rooma)
         (free left) (free right) {init})
  (:goal (and {goal})))
"""


def gripper_task(n, **kw):
    from iwsketch.generators import domain_text
    return load_task(domain_text("gripper"), gripper_problem(n), **kw)


def explicit_successors(task, s):
    """Successors by scanning every action; deliberately naive."""
    out = []
    for i, a in enumerate(task.actions):
        if all((s >> p) & 1 for p in a.pre):
            t = s
            for d in a.delete:
                t &= ~(1 << d)
            for p in a.add:
                t |= 1 << p
            out.append((i, t))
    return out


def bfs_layers(task, root, cap=200_000):
    """Distance of every state reachable from ``root``."""
    dist = {root: 0}
    q = deque([root])
    while q:
        u = q.popleft()
        for _, v in explicit_successors(task, u):
            if v not in dist:
                dist[v] = dist[u] + 1
                if len(dist) > cap:
                    raise RuntimeError("oracle cap exceeded")
                q.append(v)
    return dist


def bfs_distance(task, root, stop):
    for s, d in sorted(bfs_layers(task, root).items(), key=lambda x: x[1]):
        if stop(s):
            return d
    return None


def atoms_of(s):
    out = []
    i = 0
    while s:
        if s & 1:
            out.append(i)
        s >>= 1
        i += 1
    return out


def state_tuples(s, k):
    atoms = atoms_of(s)
    out = {(a,) for a in atoms}
    if k >= 2:
        out |= set(combinations(atoms, 2))
    return out


def width_at_most(task, root, stop, k):
    """Brute-force test of width <= k for the problem (root, stop).

    A tuple t is "good" when every state ending an optimal plan for t either
    satisfies ``stop`` with an optimal plan for it, or has a successor that
    ends an optimal plan for a good tuple one step further.  The width is at
    most k iff some tuple true in ``root`` is good.
    """
    dist = bfs_layers(task, root)
    goal_d = min((d for s, d in dist.items() if stop(s)), default=None)
    if goal_d is None:
        return False
    # first-achievement distance and end states of every tuple
    tdist: dict = {}
    ends: dict = {}
    for s, d in dist.items():
        for t in state_tuples(s, k):
            old = tdist.get(t)
            if old is None or d < old:
                tdist[t] = d
                ends[t] = [s]
            elif d == old:
                ends[t].append(s)
    by_depth: dict = {}
    for t, d in tdist.items():
        by_depth.setdefault(d, []).append(t)
    # depth -> end-state sets of good tuples (one chain continues through one tuple)
    good_ends_at: dict = {}
    good = set()
    succ_cache: dict = {}

    def succs(s):
        r = succ_cache.get(s)
        if r is None:
            r = succ_cache[s] = {v for _, v in explicit_successors(task, s)}
        return r

    for d in sorted(by_depth, reverse=True):
        if d > goal_d:
            continue
        nxt = good_ends_at.get(d + 1, set())
        good_here = set()
        for t in by_depth[d]:
            es = ends[t]
            if d == goal_d and all(stop(s) for s in es):
                ok = True
            else:
                ok = any(all(succs(s) & g for s in es) for g in nxt)
            if ok:
                good.add(t)
                good_here.add(frozenset(es))
        good_ends_at[d] = good_here
    return any(t in good for t in state_tuples(root, k))


def naive_iw_closure(task, root, k):
    """Textbook IW(k) with explicit tuple sets: breadth-first, duplicates
    skipped, depth-1 children kept but still recorded, deeper children kept
    only if they make some tuple of size <= k true for the first time."""
    seen_tuples = set(state_tuples(root, k)) if k else set()
    seen = {root}
    closure = {}
    layer = [(root, ())]
    depth = 0
    while layer:
        depth += 1
        if k == 0 and depth > 1:
            break
        nxt = []
        for u, path in layer:
            for a, v in explicit_successors(task, u):
                if v in seen:
                    continue
                seen.add(v)
                novel = False
                if k:
                    tup = state_tuples(v, k)
                    novel = bool(tup - seen_tuples)
                    seen_tuples |= tup
                if depth == 1 or novel:
                    closure[v] = path + (a,)
                    nxt.append((v, path + (a,)))
        layer = nxt
    return closure
