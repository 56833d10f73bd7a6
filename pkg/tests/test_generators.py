import json

import pytest
from hypothesis import given, settings, strategies as st

from iwsketch.generators import (DEFAULTS, DOMAINS, GenSpec, InvalidSpec, domain_text, generate, suite,
                                 suite_from_dict)
from iwsketch.pddl import load_task, parse_domain, parse_problem
from iwsketch.statespace import bfs_optimal, reachable_graph


def problem(domain, seed=0, **params):
    dtext, ptext = generate(GenSpec.make(domain, seed=seed, **params))
    return parse_problem(ptext, parse_domain(dtext))


@pytest.mark.parametrize("domain", DOMAINS)
def test_deterministic(domain):
    a = generate(GenSpec.make(domain, seed=17))
    b = generate(GenSpec.make(domain, seed=17))
    assert a == b
    assert a[0] == domain_text(domain)


def test_seed_changes_instance():
    texts = {generate(GenSpec.make("delivery", seed=s, packages=3))[1] for s in range(10)}
    assert len(texts) > 1


@settings(max_examples=40, deadline=None)
@given(domain=st.sampled_from(DOMAINS), seed=st.integers(0, 2**32))
def test_default_instances_parse_and_ground(domain, seed):
    t = load_task(*generate(GenSpec.make(domain, seed=seed)))
    assert t.goal is not None


def test_delivery_layout():
    inst = problem("delivery", seed=4, x=5, y=5, packages=4)
    cells = [o for o, t in inst.objects if t == "cell"]
    assert len(cells) == 25
    assert len(inst.goal) == 4
    assert len({g[2] for g in inst.goal}) == 1  # shared target
    starts = {a[1]: a[2] for a in inst.init if a[0] == "at" and a[1].startswith("p")}
    target = inst.goal[0][2]
    assert all(c != target for c in starts.values())
    adjacent = [a for a in inst.init if a[0] == "adjacent"]
    assert len(adjacent) == 2 * (2 * 5 * 4)  # both directions of 40 edges


def test_delivery_unique_targets_and_agents():
    inst = problem("delivery", seed=1, x=4, y=4, packages=3, agents=2, unique_targets=True)
    assert sum(1 for _, t in inst.objects if t == "truck") == 2
    assert sum(1 for a in inst.init if a[0] == "empty") == 2
    for g in inst.goal:
        start = next(a[2] for a in inst.init if a[0] == "at" and a[1] == g[1])
        assert start != g[2]


def test_gripper_counts():
    inst = problem("gripper", balls=7)
    assert len(inst.goal) == 7
    t = load_task(*generate(GenSpec.make("gripper", balls=0)))
    assert t.goal == () or len(t.goal) == 0
    assert bfs_optimal(t, t.init) == 0


def test_spanner_corridor_is_one_way():
    inst = problem("spanner", seed=3, spanners=14, nuts=7, locations=10)
    objs = dict(inst.objects)
    assert sum(1 for t in objs.values() if t == "spanner") == 14
    assert sum(1 for t in objs.values() if t == "nut") == 7
    links = [a[1:] for a in inst.init if a[0] == "link"]
    assert len(links) == 11  # shed, 10 locations, gate
    assert not any((b, a) in links for a, b in links)
    assert all(a[2] not in ("shed", "gate") for a in inst.init if a[0] == "at" and a[1].startswith("spanner"))


def test_miconic_origin_differs_from_destination():
    inst = problem("miconic", seed=5, floors=4, passengers=6)
    origin = {a[1]: a[2] for a in inst.init if a[0] == "origin"}
    dest = {a[1]: a[2] for a in inst.init if a[0] == "destin"}
    assert set(origin) == set(dest) and len(origin) == 6
    assert all(origin[p] != dest[p] for p in origin)


def test_reward_grid_stays_connected():
    for seed in range(20):
        t = load_task(*generate(GenSpec.make("reward", seed=seed, x=4, y=4, rewards=3, obstacles=4)))
        g = reachable_graph(t)
        assert g.goals, "all rewards reachable"


def test_blocks_goal_towers():
    inst = problem("blocks", seed=2, blocks=5, towers=2)
    ons = [g for g in inst.goal if g[0] == "on"]
    assert len(ons) == 3  # 5 blocks in 2 towers


def test_childsnack_gluten_ratio():
    inst = problem("childsnack", seed=0, children=4, gluten=0.5)
    assert sum(1 for a in inst.init if a[0] == "allergic_gluten") == 2
    assert sum(1 for a in inst.init if a[0] == "no_gluten_bread") == 2


@pytest.mark.parametrize("domain,params", [
    ("nosuchdomain", {}),
    ("delivery", {"wheels": 3}),
    ("delivery", {"packages": -1}),
    ("delivery", {"x": 0}),
    ("spanner", {"spanners": 1, "nuts": 2}),
    ("visitall", {"fraction": 1.5}),
    ("blocks", {"blocks": 3, "towers": 4}),
    ("reward", {"x": 2, "y": 2, "rewards": 3, "obstacles": 1}),
])
def test_invalid_specs(domain, params):
    with pytest.raises(InvalidSpec):
        generate(GenSpec.make(domain, **params))


def test_instance_id_and_characteristic():
    spec = GenSpec.make("delivery", seed=3, x=3, y=4, packages=2)
    assert spec.instance_id == "delivery_agents1_packages2_x3_y4_s3"
    assert spec.characteristic() == 2
    assert GenSpec.make("visitall", x=3, y=4).characteristic() == 12
    assert set(DEFAULTS) == set(DOMAINS)


def test_suite_expansion(tmp_path):
    data = {"seed": 1, "suites": [
        {"domain": "delivery", "params": {"x": [3, 5], "y": [3, 5], "packages": [1, 2, 3]}, "zip": ["x", "y"]},
        {"domain": "gripper", "params": {"balls": [1, 2]}, "instances": 2},
    ]}
    specs = suite_from_dict(data)
    assert len(specs) == 2 * 3 + 2 * 2
    grids = {(s.p["x"], s.p["y"]) for s in specs if s.domain == "delivery"}
    assert grids == {(3, 3), (5, 5)}
    assert len({s.instance_id for s in specs}) == len(specs)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    assert suite(path) == specs


def test_suite_errors():
    with pytest.raises(InvalidSpec):
        suite_from_dict({"suites": [{"params": {}}]})
    with pytest.raises(InvalidSpec):
        suite_from_dict({"suites": [{"domain": "delivery", "params": {"x": [3, 4], "y": [3]}, "zip": ["x", "y"]}]})
