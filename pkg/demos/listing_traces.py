"""Print subgoal traces for small instances of each sketch domain."""

from iwsketch.executor import ExecOptions, emit_trace, siw_pi
from iwsketch.generators import GenSpec, generate
from iwsketch.pddl import load_task
from iwsketch.policy import sketch_policy
from iwsketch.sketch import builtin_ruleset

# ruleset, domain, generator parameters, IW width
CASES = [
    ("R2", "delivery", dict(x=4, y=4, packages=2), 1),
    ("R3", "spanner", dict(spanners=3, nuts=2, locations=4), 1),
    ("R3", "miconic", dict(floors=3, passengers=2), 1),
    # a gluten-free sandwich on a tray is a width-2 subgoal
    ("R3", "childsnack", dict(children=2, gluten=0.5), 2),
    ("R4", "gripper", dict(balls=3), 1),
    ("R1", "reward", dict(x=4, y=4, rewards=3, obstacles=2), 1),
]

if __name__ == "__main__":
    for name, domain, params, k in CASES:
        task = load_task(*generate(GenSpec.make(domain, seed=1, **params)))
        trace = siw_pi(task, sketch_policy(builtin_ruleset(name, domain)), ExecOptions(k=k))
        print(f"== {domain} with {name}, IW({k}) ({'solved' if trace.solved else trace.reason})")
        print(emit_trace(trace, task))
