"""Command line entry point.

Subcommands: gen, solve, train, validate, bench, check-sketch.
Exit codes: 0 success, 1 unsolved / invalid / unsafe, 2 usage or input
error, 3 internal error.  Set IWSKETCH_LOG=DEBUG for search statistics.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bench import CurvePoint, aggregate_csv, curve_csv, records_csv, resolve_policy, run_suite, validation_score
from .executor import ExecOptions, check_trace, dump_trace_json, emit_trace, siw_pi
from .generators import DEFAULTS, DOMAINS, GenSpec, InvalidSpec, generate, suite
from .pddl import DEFAULT_GROUNDING_CAP, PDDLError, dump_task_json, load_task
from .policy import PolicyConfig, save_policy, train_actor_critic
from .sketch import RulesetError, UnknownBinding, UnknownFeature, builtin_ruleset, check_safe_acyclic, load_ruleset
from .statespace import StateSpaceTooLarge, format_plan, parse_plan, validate

EXIT_OK, EXIT_UNSOLVED, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("iwsketch")


class UsageError(Exception):
    pass


def _fingerprint(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def write_manifest(args, inputs, outputs, extra=None) -> None:
    if args.no_manifest:
        return
    path = args.manifest_out or _default_manifest(args, outputs)
    data = {
        "tool": "iwsketch",
        "version": __version__,
        "command": args.command,
        "argv": args.argv,
        "flags": {k: v for k, v in sorted(vars(args).items())
                  if k not in ("func", "argv", "command") and not k.startswith("_")},
        "inputs": {str(p): _fingerprint(p) for p in inputs},
        "outputs": [str(o) for o in outputs],
    }
    if extra:
        data.update(extra)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=1, sort_keys=True, default=str)
        f.write("\n")


def _default_manifest(args, outputs) -> str:
    for o in outputs:
        p = Path(o)
        if p.is_dir():
            return str(p / "manifest.json")
        return str(p.with_name(p.name + ".manifest.json"))
    return f"iwsketch-{args.command}-manifest.json"


def _read(path) -> str:
    with open(path) as f:
        return f.read()


def _load(args, unsatisfied=False):
    return load_task(_read(args.domain_file), _read(args.problem_file), cap=args.grounding_cap,
                     unsatisfied_goals=unsatisfied)


def _width(text: str) -> int:
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"width must be 1 or 2, got {text!r}") from None
    if k not in (1, 2):
        raise argparse.ArgumentTypeError(f"width must be 1 or 2, got {k}")
    return k


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _policy_arg(text: str) -> str:
    if text == "uniform" or text.startswith("sketch:") or text.startswith("trained:"):
        if text.endswith(":"):
            raise argparse.ArgumentTypeError(f"missing argument in policy {text!r}")
        return text
    raise argparse.ArgumentTypeError("policy must be sketch:R1..R4, sketch:FILE.json, trained:PATH or uniform")


# ---------------------------------------------------------------------------
# subcommands

GEN_FLAGS = sorted({k for d in DEFAULTS.values() for k in d})


def cmd_gen(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.manifest:
        specs = suite(args.manifest)
        inputs = [args.manifest]
    else:
        if not args.domain:
            raise UsageError("gen needs --domain or --manifest")
        given = {k: getattr(args, k) for k in GEN_FLAGS if getattr(args, k) is not None}
        stray = set(given) - set(DEFAULTS[args.domain])
        if stray:
            raise UsageError(f"flags not used by {args.domain}: {', '.join('--' + s for s in sorted(stray))}")
        specs = [GenSpec.make(args.domain, seed=args.seed, **given)]
        inputs = []
    outputs = []
    for spec in specs:
        dom, prob = generate(spec)
        sub = out / spec.domain if len(specs) > 1 else out
        sub.mkdir(parents=True, exist_ok=True)
        (sub / "domain.pddl").write_text(dom)
        p = sub / f"{spec.instance_id}.pddl"
        p.write_text(prob)
        outputs.append(p)
        print(p)
    write_manifest(args, inputs, [out], {"specs": [[s.domain, dict(s.params), s.seed] for s in specs]})
    return EXIT_OK


def _exec_opts(args) -> ExecOptions:
    return ExecOptions(k=args.width, cycle_prevention=args.cycle_prevention, max_calls=args.max_calls,
                       selection=args.selection, seed=args.seed)


def cmd_solve(args) -> int:
    task = _load(args, args.unsatisfied_goals)
    if args.dump_task:
        Path(args.dump_task).write_text(dump_task_json(task))
    pol = resolve_policy(args.policy, task)
    trace = siw_pi(task, pol, _exec_opts(args))
    text = emit_trace(trace, task)
    outputs = []
    if args.trace_out:
        Path(args.trace_out).write_text(text)
        outputs.append(args.trace_out)
    else:
        sys.stdout.write(text)
    if args.json_out:
        Path(args.json_out).write_text(dump_trace_json(trace, task) + "\n")
        outputs.append(args.json_out)
    if args.plan_out:
        plan = [a for seg in trace.segments for a in seg.path]
        Path(args.plan_out).write_text(format_plan(task, plan))
        outputs.append(args.plan_out)
    inputs = [args.domain_file, args.problem_file]
    if args.policy.startswith("trained:"):
        inputs.append(args.policy.split(":", 1)[1])
    write_manifest(args, inputs, outputs, {"task_fingerprint": task.fingerprint})
    if not trace.solved:
        print(f"unsolved: {trace.reason}", file=sys.stderr)
        return EXIT_UNSOLVED
    if not check_trace(task, trace):
        print("internal error: plan failed validation", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _instance_files(directory) -> tuple[Path, list[Path]]:
    d = Path(directory)
    dom = d / "domain.pddl"
    if not dom.is_file():
        raise UsageError(f"{d} has no domain.pddl")
    probs = sorted(p for p in d.glob("*.pddl") if p.name != "domain.pddl")
    if not probs:
        raise UsageError(f"{d} has no problem files")
    return dom, probs


def cmd_train(args) -> int:
    dom, probs = _instance_files(args.instances)
    dtext = _read(dom)
    tasks = [load_task(dtext, _read(p), cap=args.grounding_cap, unsatisfied_goals=args.unsatisfied_goals)
             for p in probs]
    cfg = PolicyConfig(gamma=args.gamma, alpha=args.alpha, beta=args.beta, iterations=args.iterations,
                       seed=args.seed, k=args.width, prior=args.prior, optimizer=args.optimizer,
                       eval_every=args.eval_every if args.early_stop_ratio is not None or args.eval_every else 0,
                       early_stop_ratio=args.early_stop_ratio, state_cap=args.state_cap,
                       cpu_budget=args.cpu_budget, engine=args.engine)
    if cfg.early_stop_ratio is not None and not cfg.eval_every:
        cfg.eval_every = max(1, cfg.iterations // 20)
    opts = ExecOptions(k=args.width)
    caches: dict = {}

    def validate_fn(pol):
        return validation_score(tasks, pol, opts, metric=args.metric, caches=caches).ratio

    def progress(it, info):
        log.info("iteration %d validation %s", it, info.get("validation"))

    pol = train_actor_critic(tasks, cfg, validate=validate_fn if cfg.eval_every else None, progress=progress)
    score = validation_score(tasks, pol, opts, metric=args.metric, caches=caches)
    save_policy(pol, args.out)
    print(f"iterations: {pol.meta['iterations_run']}")
    print(f"validation ({args.metric}): {score.ratio:.4f}")
    write_manifest(args, [dom] + probs, [args.out],
                   {"config": vars(cfg), "task_fingerprints": [t.fingerprint for t in tasks],
                    "validation": score.ratio, "iterations_run": pol.meta["iterations_run"],
                    "prior": "uniform over alive states, tasks sampled uniformly"})
    return EXIT_OK


def cmd_validate(args) -> int:
    task = _load(args)
    plan = parse_plan(task, _read(args.plan))
    ok, where = validate(task, task.init, plan)
    if ok:
        print(f"valid plan of length {len(plan)}")
    elif where == len(plan):
        print("invalid: plan does not reach the goal")
    else:
        print(f"invalid: step {where + 1} ({task.actions[plan[where]].pddl()}) is not applicable")
    write_manifest(args, [args.plan, args.domain_file, args.problem_file], [], {"valid": ok})
    return EXIT_OK if ok else EXIT_UNSOLVED


def cmd_bench(args) -> int:
    specs = suite(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, agg = run_suite(specs, args.policy, _exec_opts(args), oracle_cap=args.oracle_cap or None,
                             jobs=args.jobs)
    (out / "records.csv").write_text(records_csv(records))
    (out / "aggregates.csv").write_text(aggregate_csv(agg))
    points = []
    for domain in sorted({s.domain for s in specs}):
        sweep = [s for s in specs if s.domain == domain]
        by_id = {r.instance_id: r for r in records}
        for s in sweep:
            r = by_id[s.instance_id]
            agents = s.p.get("agents")
            x = s.characteristic() + ((agents or 0) if args.count_agents else 0)
            points.append(CurvePoint(s.instance_id, x, r.SL, agents, r.solved))
    (out / "curves.csv").write_text(curve_csv(points))
    disp = agg.display()
    print(" ".join(f"{k}={v}" for k, v in disp.items()))
    inputs = [args.manifest]
    if args.policy.startswith("trained:"):
        inputs.append(args.policy.split(":", 1)[1])
    write_manifest(args, inputs, [out])
    return EXIT_OK if agg.coverage == 1.0 else EXIT_UNSOLVED


def cmd_check_sketch(args) -> int:
    task = _load(args)
    if args.ruleset.lower().endswith(".json"):
        rs = load_ruleset(args.ruleset)
        inputs = [args.ruleset]
    else:
        rs = builtin_ruleset(args.ruleset, task.domain_name)
        inputs = []
    rep = check_safe_acyclic(rs, task, cap=args.state_cap)
    print(f"ruleset {rs.name}: alive={rep.alive} edges={rep.edges} no-subgoal={rep.no_subgoal}")
    print(f"safe: {rep.safe}  acyclic: {rep.acyclic}")
    if not rep.ok:
        print(f"violation: {rep.problem}")
        for s in rep.witness:
            print("  " + task.describe(s))
    write_manifest(args, inputs + [args.domain_file, args.problem_file], [],
                   {"safe": rep.safe, "acyclic": rep.acyclic})
    return EXIT_OK if rep.ok else EXIT_UNSOLVED


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iwsketch", description="Width-based planning with subgoal policies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--manifest-out", help="where to write the run manifest")
        sp.add_argument("--no-manifest", action="store_true", help="do not write a run manifest")

    def task_files(sp):
        sp.add_argument("--domain-file", required=True)
        sp.add_argument("--problem-file", required=True)
        sp.add_argument("--grounding-cap", type=int, default=DEFAULT_GROUNDING_CAP)

    def exec_flags(sp):
        sp.add_argument("--width", type=_width, default=1, help="IW width k (1 or 2)")
        sp.add_argument("--policy", type=_policy_arg, default="uniform",
                        help="sketch:R1..R4 | sketch:FILE.json | trained:PATH | uniform")
        sp.add_argument("--selection", choices=["greedy", "stochastic"], default="greedy")
        sp.add_argument("--cycle-prevention", action="store_true")
        sp.add_argument("--max-calls", type=_nonneg, default=None)
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="generate PDDL instances")
    g.add_argument("--domain", choices=DOMAINS)
    g.add_argument("--manifest", help="JSON suite manifest instead of single-instance flags")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    for name in GEN_FLAGS:
        kind = type(next(d[name] for d in DEFAULTS.values() if name in d))
        flag = "--" + name.replace("_", "-")
        if kind is bool:
            g.add_argument(flag, dest=name, action="store_const", const=True, default=None)
        else:
            g.add_argument(flag, dest=name, type=kind, default=None)
    common(g)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run SIW with a subgoal policy")
    task_files(s)
    exec_flags(s)
    s.add_argument("--trace-out")
    s.add_argument("--json-out")
    s.add_argument("--plan-out", help="write the flattened plan, one action per line")
    s.add_argument("--dump-task", help="write the grounded task as JSON")
    s.add_argument("--unsatisfied-goals", action="store_true", help="add unsatisfied-goal atoms")
    common(s)
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("train", help="train a tabular subgoal policy")
    t.add_argument("--instances", required=True, help="directory with domain.pddl and problem files")
    t.add_argument("--width", type=_width, default=1)
    t.add_argument("--gamma", type=float, default=0.999)
    t.add_argument("--alpha", type=float, default=2e-4)
    t.add_argument("--beta", type=float, default=None, help="critic step size (default: alpha)")
    t.add_argument("--iterations", type=_nonneg, default=1_000_000)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--early-stop-ratio", type=float, default=None)
    t.add_argument("--eval-every", type=_nonneg, default=0)
    t.add_argument("--cpu-budget", type=float, default=None, help="stop after this many CPU seconds")
    t.add_argument("--metric", choices=["primitive", "subgoal"], default="primitive")
    t.add_argument("--optimizer", choices=["sgd", "adam"], default="sgd")
    t.add_argument("--engine", choices=["auto", "python", "numba"], default="auto",
                   help="training loop implementation (auto: numba when installed)")
    t.add_argument("--prior", choices=["uniform-alive", "init-only"], default="uniform-alive")
    t.add_argument("--state-cap", type=int, default=50_000)
    t.add_argument("--grounding-cap", type=int, default=DEFAULT_GROUNDING_CAP)
    t.add_argument("--unsatisfied-goals", action="store_true")
    t.add_argument("--out", required=True)
    common(t)
    t.set_defaults(func=cmd_train)

    v = sub.add_parser("validate", help="check a plan file")
    v.add_argument("--plan", required=True)
    task_files(v)
    common(v)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("bench", help="run a generated suite and write CSV results")
    b.add_argument("--manifest", required=True)
    exec_flags(b)
    b.add_argument("--out-dir", required=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--oracle-cap", type=_nonneg, default=200_000, help="BFS state cap for L_opt (0 disables)")
    b.add_argument("--count-agents", action="store_true", help="curve x = objects + agents")
    common(b)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check-sketch", help="exhaustively check a ruleset for safety and acyclicity")
    c.add_argument("--ruleset", required=True, help="R1..R4 or a JSON ruleset file")
    task_files(c)
    c.add_argument("--state-cap", type=int, default=50_000)
    common(c)
    c.set_defaults(func=cmd_check_sketch)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("IWSKETCH_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    args.argv = argv
    try:
        return args.func(args)
    except (UsageError, InvalidSpec, UnknownBinding, UnknownFeature, RulesetError, PDDLError,
            StateSpaceTooLarge, FileNotFoundError, ValueError) as e:
        print(f"iwsketch {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"iwsketch {args.command}: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
