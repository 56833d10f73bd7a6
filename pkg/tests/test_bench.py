import math

import pytest

from iwsketch.bench import (Aggregate, RunRecord, aggregate, aggregate_csv, curve_csv, novelty_bound, records_csv,
                            records_from_csv, resolve_policy, run_suite, subgoal_curve, validation_score)
from iwsketch.executor import ExecOptions
from iwsketch.generators import GenSpec
from iwsketch.policy import TabularPolicy, UniformPolicy, sketch_policy
from iwsketch.sketch import builtin_ruleset
from oracles import delivery_1x2, gripper_task


def test_delivery_sweep_subgoal_law():
    specs = [GenSpec.make("delivery", seed=p, x=5, y=5, packages=p) for p in range(1, 11)]
    records, agg = run_suite(specs, "sketch:R2", ExecOptions(k=1), oracle_cap=None)
    assert agg.coverage == 1.0
    for r in records:
        assert r.solved and r.valid and r.novelty_bound_ok
        assert r.SL == 2 * r.characteristic


def test_aggregate_empty_and_unsolved():
    agg = aggregate([])
    assert agg == Aggregate(0, 0.0, None, None, None)
    recs = [RunRecord("a", "d", False, 3, 7), RunRecord("b", "d", True, 2, 6, L_opt=3, PQ=2.0)]
    agg = aggregate(recs)
    assert agg.coverage == 0.5 and agg.mean_SL == 2 and agg.mean_L == 6 and agg.PQ == 2.0
    assert agg.display() == {"instances": 2, "coverage": 0.5, "SL": 2, "L": 6, "PQ": 2.0}


def test_records_csv_round_trip():
    specs = [GenSpec.make("gripper", balls=b) for b in (1, 2)] + [GenSpec.make("miconic", seed=1)]
    records, agg = run_suite(specs, lambda t: sketch_policy(builtin_ruleset("R4" if t.domain_name == "gripper"
                                                                            else "R3", t.domain_name)))
    text = records_csv(records)
    assert text.splitlines()[0].startswith("csv_version,instance_id,")
    again = records_from_csv(text)
    assert again == records
    assert aggregate_csv(agg).splitlines()[0] == "csv_version,instances,coverage,mean_SL,mean_L,PQ"
    assert all(r.PQ is not None and r.PQ >= 1.0 for r in records)


def test_records_sorted_and_parallel_matches_serial():
    specs = [GenSpec.make("gripper", balls=b) for b in (3, 1, 2)]
    serial, _ = run_suite(specs, "sketch:R4", ExecOptions(k=1))
    par, _ = run_suite(specs, "sketch:R4", ExecOptions(k=1), jobs=2)
    assert [r.instance_id for r in serial] == sorted(r.instance_id for r in serial)
    strip = lambda rs: [(r.instance_id, r.SL, r.L, r.L_opt) for r in rs]  # noqa: E731
    assert strip(serial) == strip(par)


def test_novelty_bound_values():
    t = gripper_task(1)
    n = len(t.atoms)
    assert novelty_bound(t, 0) == 0
    assert novelty_bound(t, 1) == n
    assert novelty_bound(t, 2) == n + n * (n - 1) // 2


def test_resolve_policy():
    t = gripper_task(1)
    assert isinstance(resolve_policy("uniform", t), UniformPolicy)
    assert resolve_policy("sketch:R4", t).describe().startswith("sketch")
    with pytest.raises(ValueError):
        resolve_policy("oracle", t)


def test_validation_score_sketch_policy():
    t = delivery_1x2()
    pol = sketch_policy(builtin_ruleset("R2", "delivery"))
    sub = validation_score([t], pol, ExecOptions(k=1), metric="subgoal")
    assert sub.ratio == 1.0 and sub.solved == sub.states
    prim = validation_score([t], pol, ExecOptions(k=1))
    assert prim.ratio == pytest.approx(1.0)


def test_validation_score_uniform_is_worse():
    t = gripper_task(2)
    score = validation_score([t], UniformPolicy(), ExecOptions(k=1, max_calls=200))
    assert score.ratio > 1.0
    assert float(score) == score.ratio


def test_validation_score_failure_is_infinite():
    t = gripper_task(1)
    score = validation_score([t], UniformPolicy(), ExecOptions(k=1, max_calls=0))
    assert math.isinf(score.ratio) and score.solved == 0


def test_validation_score_rejects_metric():
    with pytest.raises(ValueError):
        validation_score([gripper_task(1)], TabularPolicy(), metric="reward")


def test_delivery_curve_two_agents():
    sweep = [GenSpec.make("delivery", seed=p, x=4, y=4, packages=p, agents=2) for p in (1, 2, 3)]
    pts = subgoal_curve("delivery", sweep, "sketch:R2", ExecOptions(k=1), count_agents=True)
    assert [(p.x, p.y) for p in pts] == [(3, 2), (4, 4), (5, 6)]
    assert all(p.y == 2 * (p.x - p.agents) for p in pts)
    text = curve_csv(pts)
    assert text.splitlines()[0] == "csv_version,instance_id,x,y,agents,solved"
    with pytest.raises(ValueError):
        subgoal_curve("gripper", sweep, "sketch:R2")
