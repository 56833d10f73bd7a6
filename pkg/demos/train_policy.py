"""Train a tabular subgoal policy with actor-critic and inspect it.

Trains on Gripper with 1-3 balls and Delivery 3x3 with 1-2 packages at the
default step sizes, stopping once the validation ratio is at most 1.05,
then rolls the greedy policy out from each initial state.
"""

import argparse
import time

from iwsketch.bench import validation_score
from iwsketch.executor import ExecOptions, siw_pi
from iwsketch.generators import GenSpec, generate
from iwsketch.pddl import load_task
from iwsketch.policy import PolicyConfig, train_actor_critic


def task(domain, **params):
    return load_task(*generate(GenSpec.make(domain, **params)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=1)
    ap.add_argument("--budget", type=float, default=600, help="CPU seconds")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    tasks = [task("gripper", balls=n) for n in (1, 2, 3)]
    tasks += [task("delivery", x=3, y=3, packages=p) for p in (1, 2)]
    opts = ExecOptions(k=args.width)
    caches = {}

    def score(pol):
        return validation_score(tasks, pol, opts, caches=caches).ratio

    t0 = time.process_time()
    cfg = PolicyConfig(k=args.width, iterations=10**10, seed=args.seed, eval_every=20_000_000,
                       early_stop_ratio=1.05, cpu_budget=args.budget)
    pol = train_actor_critic(tasks, cfg, validate=score,
                             progress=lambda it, info: print(f"{it:>12} updates  validation {info['validation']:.3f}"
                                                             f"  {time.process_time() - t0:.0f}s", flush=True))
    sub = validation_score(tasks, pol, opts, metric="subgoal", caches=caches).ratio
    print(f"final validation {score(pol):.3f} (subgoal ratio {sub:.3f}), engine {pol.meta['engine']}")
    for t in tasks:
        tr = siw_pi(t, pol, opts)
        print(f"{t.name}: solved={tr.solved} subgoals={tr.subgoal_count} actions={tr.primitive_length}")


if __name__ == "__main__":
    main()
