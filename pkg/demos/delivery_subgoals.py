"""Subgoal counts on generated Delivery instances.

SIW with sketch R2 and IW(1) should need 2 jumps per package, and with
R1 and IW(2) one jump per package.  Prints one row per instance.
"""

import argparse

from iwsketch.executor import ExecOptions, check_trace, siw_pi
from iwsketch.generators import GenSpec, generate
from iwsketch.pddl import load_task
from iwsketch.policy import sketch_policy
from iwsketch.sketch import builtin_ruleset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=5)
    ap.add_argument("--max-packages", type=int, default=6)
    args = ap.parse_args()
    r2 = sketch_policy(builtin_ruleset("R2", "delivery"))
    r1 = sketch_policy(builtin_ruleset("R1", "delivery"))
    print(f"{'packages':>8} {'SL k=1':>7} {'L k=1':>6} {'SL k=2':>7} {'L k=2':>6}")
    for n in range(1, args.max_packages + 1):
        spec = GenSpec.make("delivery", seed=n, x=args.grid, y=args.grid, packages=n)
        task = load_task(*generate(spec))
        a = siw_pi(task, r2, ExecOptions(k=1))
        b = siw_pi(task, r1, ExecOptions(k=2))
        assert check_trace(task, a) and check_trace(task, b)
        print(f"{n:>8} {a.subgoal_count:>7} {a.primitive_length:>6} {b.subgoal_count:>7} {b.primitive_length:>6}")


if __name__ == "__main__":
    main()
