import json

import pytest

from iwsketch.executor import ExecOptions, check_trace, dump_trace_json, emit_trace, flatten, siw_pi
from iwsketch.policy import SubgoalPolicy, UniformPolicy, sketch_policy
from iwsketch.sketch import builtin_ruleset, eval_features, ruleset_from_dict
from iwsketch.statespace import bfs_optimal, bfs_plan, execute, is_goal
from oracles import bfs_distance, delivery_1x2, fixture_task, gen_task, gripper_task


def run(task, name, domain, k=1, **kw):
    return siw_pi(task, sketch_policy(builtin_ruleset(name, domain)), ExecOptions(k=k, **kw))


def test_delivery_listing_instance_r2():
    t = fixture_task("delivery", "delivery_5x5_p4.pddl")
    tr = run(t, "R2", "delivery")
    assert tr.solved and tr.subgoal_count == 8
    assert tr.primitive_length <= 39 * 1.1
    assert check_trace(t, tr)
    # segments alternate between picking up and dropping off
    lasts = [t.actions[seg.path[-1]].name for seg in tr.segments]
    assert lasts == ["pick_package", "drop_package"] * 4


def test_trace_text_shape():
    t = fixture_task("delivery", "delivery_5x5_p4.pddl")
    text = emit_trace(run(t, "R2", "delivery"), t)
    lines = text.splitlines()
    assert lines[0].startswith("Primitive plan: ")
    assert lines[1] == "Plan: 8"
    assert lines[2].startswith("1 ") and lines[2].endswith(")")
    assert "pick_package" in lines[2].split(" -> ")[-1]
    assert "drop_package" in lines[3].split(" -> ")[-1]
    assert len(lines) == 10


def test_goal_at_start_gives_empty_trace():
    t = delivery_1x2()
    goal = execute(t, t.init, bfs_plan(t, t.init))
    tr0 = siw_pi(t, UniformPolicy(), ExecOptions(), start=goal)
    assert tr0.solved and tr0.subgoal_count == 0
    assert emit_trace(tr0, t) == "Primitive plan: 0\nPlan: 0\n"


@pytest.mark.parametrize("fixture,domain,name,subgoals,listed", [
    ("spanner_s10_n10_l10.pddl", "spanner", "R3", 20, 31),
    ("miconic_s1_0.pddl", "miconic", "R3", 2, 4),
    ("childsnack_1.pddl", "childsnack", "R3", 2, 4),
])
def test_listing_traces(fixture, domain, name, subgoals, listed):
    t = fixture_task(domain, fixture)
    tr = run(t, name, domain)
    assert tr.solved and tr.subgoal_count == subgoals
    assert tr.primitive_length <= listed * 1.1
    assert check_trace(t, tr)
    if listed <= 4:
        assert tr.primitive_length >= bfs_optimal(t, t.init)


def test_gripper_22_alternates():
    t = gripper_task(22)
    tr = run(t, "R4", "gripper")
    assert tr.solved and tr.subgoal_count == 44
    assert tr.primitive_length <= 85 * 1.1
    assert check_trace(t, tr)
    rs = builtin_ruleset("R4", "gripper")
    s = t.init
    undelivered = [eval_features(rs, t, s)["N1"]]
    for seg in tr.segments:
        s = seg.subgoal
        undelivered.append(eval_features(rs, t, s)["N1"])
    assert undelivered[-1] == 0
    # never more than one ball delivered per subgoal
    assert all(a - b in (0, 1) for a, b in zip(undelivered, undelivered[1:]))


def test_segments_are_iw_paths():
    t = gen_task("delivery", x=3, y=3, packages=2)
    tr = run(t, "R1", "delivery", k=2)
    assert tr.solved and tr.subgoal_count == 2
    s = t.init
    for seg in tr.segments:
        # each jump is a shortest path to the chosen subgoal
        assert len(seg.path) == bfs_distance(t, s, lambda x, g=seg.subgoal: x == g)
        s = seg.subgoal
    assert is_goal(t, s)


def test_max_calls_reported():
    t = gripper_task(3)
    tr = run(t, "R4", "gripper", max_calls=2)
    assert not tr.solved and tr.reason == "max-calls"
    assert tr.calls == 2 and tr.subgoal_count == 2
    assert not check_trace(t, tr)
    tr0 = run(t, "R4", "gripper", max_calls=0)
    assert tr0.reason == "max-calls" and tr0.subgoal_count == 0


def test_default_call_limit():
    assert ExecOptions().call_limit(gripper_task(3)) == 16
    assert ExecOptions(max_calls=5).call_limit(gripper_task(3)) == 5


def test_policy_failure_reported():
    # a sketch without any rule that can fire never proposes a subgoal
    rs = ruleset_from_dict({"features": {"N": "goals.unachieved"},
                            "rules": [{"conditions": {"N": ">0"}, "effects": {"N": "inc"}}]})
    t = gripper_task(1)
    tr = siw_pi(t, sketch_policy(rs), ExecOptions())
    assert not tr.solved and tr.reason == "policy-failure"


def test_cycle_prevention_never_revisits():
    # a policy that favours the smallest non-goal state bounces between two
    # states; with exclusions no subgoal is chosen twice
    t = delivery_1x2()

    class BackAndForth(SubgoalPolicy):
        def distribution(self, task, s, candidates):
            fav = min(candidates, key=lambda c: (is_goal(task, c), c))
            return {c: (1.0 if c == fav else 0.0) for c in candidates}

    tr = siw_pi(t, BackAndForth(), ExecOptions(max_calls=12))
    assert not tr.solved and tr.reason == "max-calls"
    assert len({seg.subgoal for seg in tr.segments}) < tr.subgoal_count
    tr2 = siw_pi(t, BackAndForth(), ExecOptions(max_calls=12, cycle_prevention=True))
    subgoals = [seg.subgoal for seg in tr2.segments]
    assert len(set(subgoals)) == len(subgoals)
    assert tr2.solved or tr2.reason == "no-candidates"


def test_stochastic_selection_is_seeded():
    t = gripper_task(3)
    a = siw_pi(t, UniformPolicy(), ExecOptions(selection="stochastic", seed=9, max_calls=50))
    b = siw_pi(t, UniformPolicy(), ExecOptions(selection="stochastic", seed=9, max_calls=50))
    assert flatten(a) == flatten(b)


def test_trace_json():
    t = fixture_task("miconic", "miconic_s1_0.pddl")
    tr = run(t, "R3", "miconic")
    data = json.loads(dump_trace_json(tr, t))
    assert data["solved"] and data["reason"] is None
    assert data["subgoal_count"] == 2 and data["primitive_length"] == 4
    assert sum(len(s["actions"]) for s in data["segments"]) == 4
    assert "seconds" not in data
    assert dump_trace_json(run(t, "R3", "miconic"), t) == dump_trace_json(tr, t)


def test_bad_options():
    with pytest.raises(ValueError):
        ExecOptions(k=3)
    with pytest.raises(ValueError):
        ExecOptions(selection="softmax")
    with pytest.raises(ValueError):
        ExecOptions(max_calls=-1)


def test_childsnack_allergic_children_need_width_two():
    # with the resource-aware N2 feature, "gluten-free sandwich on a tray"
    # needs the atom pair (no_gluten_sandwich, ontray); IW(1) prunes it
    pol = sketch_policy(builtin_ruleset("R3", "childsnack"))
    for seed in range(3):
        t = gen_task("childsnack", seed=seed, children=2, gluten=1.0)
        tr2 = siw_pi(t, pol, ExecOptions(k=2))
        assert tr2.solved and tr2.subgoal_count == 4 and check_trace(t, tr2)
        assert not siw_pi(t, pol, ExecOptions(k=1)).solved
    t = gen_task("childsnack", seed=0, children=3, gluten=0.0)
    tr = siw_pi(t, pol, ExecOptions(k=1))
    assert tr.solved and tr.subgoal_count == 6
