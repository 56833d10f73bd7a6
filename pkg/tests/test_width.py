import random

import pytest
from hypothesis import given, settings, strategies as st

from iwsketch.bench import novelty_bound
from iwsketch.generators import GenSpec, generate
from iwsketch.pddl import load_task
from iwsketch.statespace import bfs_optimal, execute, is_goal, reachable_graph, validate
from iwsketch.width import NoveltyTable, iw, nk_successors, novelty_check, siw_classic, unachieved_goal_count
from oracles import (bfs_distance, delivery_1x2, gen_task, gripper_task, naive_iw_closure, state_tuples,
                     width_at_most)


# -- novelty table ------------------------------------------------------------

def test_empty_table_everything_novel():
    for k in (1, 2):
        assert novelty_check(NoveltyTable(k, 5), 0b00100)


def test_k1_subset_of_seen_is_not_novel():
    t = NoveltyTable(1, 4)
    assert t.check(0b0011)
    assert t.check(0b1100)
    assert not t.check(0b0110)


def test_k2_unseen_pair_is_novel():
    t = NoveltyTable(2, 3)
    assert t.check(0b011)  # {0,1}
    assert t.check(0b110)  # {1,2}
    # atoms 0 and 2 have both been seen, but never together
    assert t.check(0b101)
    assert not t.check(0b101)
    assert t.tuples() == {(0,), (1,), (2,), (0, 1), (1, 2), (0, 2)}


def test_bad_table_width():
    with pytest.raises(ValueError):
        NoveltyTable(3, 4)


@settings(max_examples=200, deadline=None)
@given(k=st.sampled_from([1, 2]), states=st.lists(st.integers(0, 2**7 - 1), min_size=1, max_size=25))
def test_novelty_matches_brute_force(k, states):
    table = NoveltyTable(k, 7)
    seen = set()
    for s in states:
        tup = state_tuples(s, k)
        assert table.check(s) == bool(tup - seen)
        seen |= tup
    assert table.tuples() == seen


@settings(max_examples=200, deadline=None)
@given(states=st.lists(st.integers(0, 2**7 - 1), min_size=2, max_size=25))
def test_new_atom_hint_is_exact(states):
    """check(child, child & ~parent) agrees with a full check whenever all
    tuples of the parent are already recorded."""
    table = NoveltyTable(2, 7)
    seen = set()
    parent = states[0]
    table.check(parent)
    seen |= state_tuples(parent, 2)
    for child in states[1:]:
        expect = bool(state_tuples(child, 2) - seen)
        assert table.check(child, child & ~parent) == expect
        seen |= state_tuples(child, 2)
        if expect:
            parent = child


# -- IW ----------------------------------------------------------------------

def test_iw_delivery_hold_package():
    t = delivery_1x2()
    held = t.atom_of("carrying", "t1", "p1")
    res = iw(t, t.init, 1, stop=lambda s: (s >> held) & 1, mode="first-hit")
    s, path = res.found
    assert [t.actions[a].label() for a in path] == ["pick_package(t1, p1, c0)"]


def test_iw_root_is_goal():
    t = delivery_1x2()
    res = iw(t, t.init, 1, stop=lambda s: True, mode="first-hit")
    assert res.found == (t.init, ())


def test_iw_blocks_atomic_goal_width_two():
    t = gen_task("blocks", seed=1, blocks=2, towers=1)
    (goal_atom,) = t.goal
    stop = lambda s: (s >> goal_atom) & 1  # noqa: E731
    res = iw(t, t.init, 2, stop=stop, mode="first-hit")
    assert res.found is not None
    assert len(res.found[1]) == bfs_optimal(t, t.init)


def test_iw_unreachable_stop():
    t = delivery_1x2()
    res = iw(t, t.init, 2, stop=lambda s: False, mode="first-hit")
    assert res.found is None


def test_gripper_n1_closure_k1():
    # hand simulation: every atom except at(ball1, roomb) is seen at depth 1,
    # so every depth-2 state is pruned
    t = gripper_task(1)
    got = {t.describe(s) for s in nk_successors(t, t.init, 1)}
    assert got == {
        "{at(ball1, rooma), at-robby(roomb), free(left), free(right)}",
        "{at-robby(rooma), carry(ball1, left), free(right)}",
        "{at-robby(rooma), carry(ball1, right), free(left)}",
    }
    goal_states = [s for s in nk_successors(t, t.init, 2) if is_goal(t, s)]
    assert len(goal_states) == 2


def test_k0_is_one_step_successors():
    t = gripper_task(2)
    from iwsketch.statespace import successors
    assert set(nk_successors(t, t.init, 0)) == {v for _, v in successors(t, t.init)}


def test_no_applicable_actions_empty_closure():
    t = gripper_task(1)
    assert len(nk_successors(t, 0, 1)) == 0


def test_closure_paths_executable_and_root_excluded():
    t = gen_task("delivery", x=3, y=3, packages=2)
    res = iw(t, t.init, 2)
    assert t.init not in res.closure
    for s, path in res.closure.items():
        assert execute(t, t.init, path) == s
        assert res.closure.depth(s) == len(path)


@settings(max_examples=40, deadline=None)
@given(domain=st.sampled_from(["delivery", "gripper", "visitall", "blocks", "spanner"]),
       seed=st.integers(0, 1000), k=st.sampled_from([0, 1, 2]), walk=st.integers(0, 12))
def test_closure_matches_naive_iw(domain, seed, k, walk):
    small = {"delivery": dict(x=3, y=2, packages=2), "gripper": dict(balls=2), "visitall": dict(x=3, y=2),
             "blocks": dict(blocks=3), "spanner": dict(spanners=2, nuts=1, locations=3)}
    t = gen_task(domain, seed=seed, **small[domain])
    rng = random.Random(seed)
    s = t.init
    from iwsketch.statespace import successors
    for _ in range(walk):
        nxt = successors(t, s)
        if not nxt:
            break
        s = rng.choice(nxt)[1]
    closure = nk_successors(t, s, k)
    ref = naive_iw_closure(t, s, k)
    assert dict(closure.items()) == ref


@pytest.mark.parametrize("k", [1, 2])
def test_novelty_bound_on_gripper(k):
    t = gripper_task(3)
    for s in reachable_graph(t).states:
        res = iw(t, s, k)
        assert len(res.closure) <= novelty_bound(t, k) + res.depth1


def test_first_hit_optimal_on_width_bounded_subproblems():
    t = gripper_task(2)
    rng = random.Random(7)
    states = reachable_graph(t).states
    checked = 0
    for _ in range(60):
        root = rng.choice(states)
        atom = rng.randrange(len(t.atoms))
        if (root >> atom) & 1:
            continue
        stop = lambda s, a=atom: (s >> a) & 1  # noqa: E731
        for k in (1, 2):
            if not width_at_most(t, root, stop, k):
                continue
            res = iw(t, root, k, stop=stop, mode="first-hit")
            assert res.found is not None
            assert len(res.found[1]) == bfs_distance(t, root, stop)
            checked += 1
            break
    assert checked > 10


# -- SIW ---------------------------------------------------------------------

def test_siw_gripper_two_balls():
    t = gripper_task(2)
    plan = siw_classic(t, 2)
    assert validate(t, t.init, plan)[0]
    # #g decreases 2 -> 1 -> 0 along the plan
    s = t.init
    counts = [unachieved_goal_count(t, s)]
    for a in plan:
        from iwsketch.statespace import apply
        s = apply(t, s, a)
        if unachieved_goal_count(t, s) != counts[-1]:
            counts.append(unachieved_goal_count(t, s))
    assert counts == [2, 1, 0]


def test_siw_goal_init_empty_plan():
    dom, prob = generate(GenSpec.make("gripper", balls=0))
    t = load_task(dom, prob)
    assert siw_classic(t) == []


def test_siw_delivery_listing_instance():
    from oracles import fixture_task
    t = fixture_task("delivery", "delivery_5x5_p4.pddl")
    plan = siw_classic(t, 2)
    assert validate(t, t.init, plan)[0]
    s, drops = t.init, 0
    from iwsketch.statespace import apply
    for a in plan:
        before = unachieved_goal_count(t, s)
        s = apply(t, s, a)
        if unachieved_goal_count(t, s) < before:
            drops += 1
            assert t.actions[a].name == "drop_package"
    assert drops == 4


def test_unachieved_goal_count():
    from oracles import gripper_task as gt
    assert unachieved_goal_count(gt(22), gt(22).init) == 22
    t = gen_task("delivery", seed=2, x=5, y=5, packages=4)
    held = lambda s: any(t.atoms[i][0] == "carrying" and (s >> i) & 1  # noqa: E731
                         for i in range(len(t.atoms)))
    res = iw(t, t.init, 2, stop=lambda s: unachieved_goal_count(t, s) == 3, mode="first-hit")
    assert unachieved_goal_count(t, res.found[0]) == 3
    assert not held(res.found[0])
    end = t.init
    for s in reachable_graph(delivery_1x2()).states:
        if is_goal(delivery_1x2(), s):
            end = s
    assert unachieved_goal_count(delivery_1x2(), end) == 0


def test_bad_arguments():
    t = delivery_1x2()
    with pytest.raises(ValueError):
        iw(t, t.init, 3)
    with pytest.raises(ValueError):
        iw(t, t.init, 1, mode="best-first")
    with pytest.raises(ValueError):
        siw_classic(t, 3)
