"""``rec-apc`` command line.

Exit codes: 0 on success, 1 when a domain error (or an I/O failure) stops
the command, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import compute_constants, detect_convergence, uncertainty_curve, write_curve_csv
from .bench import bench_run, write_bench_csv
from .errors import NotConvergedWithinBudget, RecApcError
from .ingest import MODES, ingest_ratings, read_assignment_csv, read_ratings_csv
from .instances import GeneratorConfig, generate_instance
from .model import Instance, dumps_instance, load_instance, walk
from .pomdp import build_pomdp, dumps_pomdp, write_pomdp_file
from .simulation import simulate_batch, write_sessions_csv
from .solvers import QUEUE_DISCIPLINES, policy_bfa, policy_myopic, solve_bnb, solve_bruteforce, solve_dp
from .valuation import Policy, horizon_for_epsilon, value_finite_horizon, value_policy

ALGORITHMS = ("bnb", "dp", "brute", "myopic", "bfa")


class UsageError(Exception):
    pass


def _categories(instance: Instance, text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(instance.category_index(c.strip()) for c in text.split(","))
    except (KeyError, IndexError) as exc:
        raise UsageError(str(exc)) from None


def _belief(text: str | None) -> np.ndarray | None:
    if text is None:
        return None
    try:
        return np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse belief {text!r}") from None


def _sizes(text: str) -> list[tuple[int, int]]:
    try:
        out = []
        for part in text.split(","):
            m, k = part.lower().split("x")
            out.append((int(m), int(k)))
        return out
    except ValueError:
        raise UsageError(f"sizes must look like 3x10,5x10 (types x categories), got {text!r}") from None


def _names(instance: Instance, ks: Sequence[int]) -> list[str]:
    return [instance.categories[k] for k in ks]


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def cmd_solve(args, out) -> None:
    inst = load_instance(args.instance)
    start = _belief(args.start)
    doc: dict = {"algorithm": args.algorithm}
    if args.algorithm == "bnb":
        res = solve_bnb(inst, args.epsilon, args.queue, belief=start, max_nodes=args.max_nodes)
        pol = res.extended_policy
        doc.update(
            value=res.value,
            upper_certificate=res.upper_certificate,
            gap=res.gap,
            prefix=_names(inst, res.prefix),
            tail=inst.categories[pol.tail],
            nodes_expanded=res.nodes_expanded,
            wall_time_ms=res.wall_time * 1000.0,
        )
    elif args.algorithm in ("dp", "brute"):
        if start is not None:
            raise UsageError("--start is only supported by bnb, myopic and bfa")
        h = args.horizon or horizon_for_epsilon(inst, args.epsilon)
        res = (solve_dp if args.algorithm == "dp" else solve_bruteforce)(inst, h)
        doc.update(horizon=h, value=res.value, prefix=_names(inst, res.prefix))
    elif args.algorithm == "myopic":
        b = inst.q if start is None else start
        seq = policy_myopic(inst, b, args.steps)
        doc.update(
            steps=args.steps,
            value_over_steps=value_finite_horizon(inst, b, seq, len(seq)),
            prefix=_names(inst, seq),
        )
    else:
        b = inst.q if start is None else start
        k = policy_bfa(inst, b)
        doc.update(value=value_policy(inst, b, Policy((), k)), prefix=[], tail=inst.categories[k])
    for key, value in doc.items():
        if isinstance(value, list):
            value = ",".join(value) if value else "-"
        print(f"{key}: {value}", file=out)
    if args.out:
        _write_json(args.out, doc)


def cmd_walk(args, out) -> None:
    inst = load_instance(args.instance)
    prefix = _categories(inst, args.prefix)
    if not prefix:
        raise UsageError("--prefix must name at least one category")
    w = walk(inst, prefix, _belief(args.start))
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else out
    try:
        wr = csv.writer(fh)
        wr.writerow(["round", "category", "reward", *(f"b_{t}" for t in inst.types)])
        for t, s in enumerate(w.steps, start=1):
            wr.writerow([t, inst.categories[s.category], repr(s.reward), *(repr(float(x)) for x in s.belief)])
        wr.writerow([len(w) + 1, "", "", *(repr(float(x)) for x in w.end_belief)])
    finally:
        if args.out:
            fh.close()


def cmd_analyze(args, out) -> None:
    inst = load_instance(args.instance)
    c = compute_constants(inst)
    for name in ("c1", "c2", "c3", "c4", "c"):
        print(f"{name}: {getattr(c, name):.6g}", file=out)
    if c.theorems_apply:
        print(f"delta: {c.delta:.6g}", file=out)
        print(f"value_ceiling: {c.value_ceiling:.6g}", file=out)
        print(f"max_unconcentrated: {c.max_unconcentrated()}", file=out)
    else:
        print("theorem preconditions unmet (c = 0)", file=out)
    try:
        rep = detect_convergence(inst, args.epsilon, args.max_rounds)
    except NotConvergedWithinBudget as exc:
        print(f"converged: no ({exc})", file=out)
        return
    print("converged: yes", file=out)
    print(f"T: {rep.T}", file=out)
    print(f"final_category: {inst.categories[rep.final_category]}", file=out)
    print(f"final_type: {inst.types[rep.final_type]}", file=out)
    if c.theorems_apply:
        print(f"unconcentrated_count: {rep.unconcentrated_count}", file=out)
    if args.curve_out:
        curve = uncertainty_curve(inst, args.epsilon, args.rounds, max_rounds=args.max_rounds)
        write_curve_csv(args.curve_out, inst, curve)


def cmd_simulate(args, out) -> None:
    inst = load_instance(args.instance)
    tail = _categories(inst, args.tail)
    if len(tail) != 1:
        raise UsageError("--tail must name exactly one category")
    policy = Policy(_categories(inst, args.prefix), tail[0])
    batch = simulate_batch(inst, policy, args.sessions, args.seed)
    s = batch.summary()
    print(f"sessions: {s.sessions}", file=out)
    print(f"mean_likes: {s.mean_likes:.6f}", file=out)
    print(f"std_error: {s.std_error:.6f}", file=out)
    print(f"ci95: [{s.ci95_low:.6f}, {s.ci95_high:.6f}]", file=out)
    print(f"analytic_value: {value_policy(inst, inst.q, policy):.6f}", file=out)
    if args.sessions_out:
        write_sessions_csv(args.sessions_out, inst, batch)


def cmd_gen(args, out) -> None:
    cfg = GeneratorConfig(args.categories, args.types, args.clip, args.prior_std, args.seed)
    text = dumps_instance(generate_instance(cfg)) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_ingest(args, out) -> None:
    table = read_ratings_csv(args.ratings, args.rating_max)
    kwargs = {}
    if args.mode == "external-assignments":
        if not (args.user_assignments and args.item_assignments):
            raise UsageError("external-assignments needs --user-assignments and --item-assignments")
        kwargs = dict(
            user_assignment=read_assignment_csv(args.user_assignments, "user_id"),
            item_assignment=read_assignment_csv(args.item_assignments, "item_id"),
        )
    elif args.user_clusters is None or args.item_clusters is None:
        raise UsageError("alternating-kmeans needs --user-clusters and --item-clusters")
    res = ingest_ratings(
        table, args.user_clusters, args.item_clusters, args.mode, args.noise_std, args.seed, **kwargs
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(res.instance) + "\n")
    _write_json(args.out + ".meta.json", res.metadata)
    print(f"categories: {res.instance.n_categories}", file=out)
    print(f"types: {res.instance.n_types}", file=out)
    print(f"imputed_cells: {len(res.imputed_cells)}", file=out)


def cmd_export_pomdp(args, out) -> None:
    model = build_pomdp(load_instance(args.instance))
    if args.out:
        write_pomdp_file(model, args.out)
    else:
        out.write(dumps_pomdp(model))


def cmd_bench(args, out) -> None:
    report = bench_run(_sizes(args.sizes), args.reps, args.epsilon, args.resamples, args.seed)
    if args.out:
        write_bench_csv(args.out, report)
    print("n_types,n_categories,reps,mean_runtime_ms,ci95_low_ms,ci95_high_ms,mean_nodes", file=out)
    for r in report.rows:
        print(
            f"{r.n_types},{r.n_categories},{r.reps},{r.mean_runtime:.4f},{r.ci95_low:.4f},"
            f"{r.ci95_high:.4f},{r.mean_nodes:.2f}",
            file=out,
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rec-apc", description="Recommendation planning under churn.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute an (epsilon-)optimal policy")
    p.add_argument("instance")
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="bnb")
    p.add_argument("--queue", choices=QUEUE_DISCIPLINES, default="best")
    p.add_argument("--horizon", type=int, help="horizon for dp/brute (default H(epsilon))")
    p.add_argument("--steps", type=int, default=10, help="length of the myopic sequence")
    p.add_argument("--start", help="start belief, comma separated (default: prior)")
    p.add_argument("--max-nodes", type=int)
    p.add_argument("--out", help="write the result as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("walk", help="belief walk of a category prefix")
    p.add_argument("instance")
    p.add_argument("--prefix", required=True, help="comma-separated categories")
    p.add_argument("--start")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("analyze", help="instance constants and convergence")
    p.add_argument("instance")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-rounds", type=int, default=500)
    p.add_argument("--rounds", type=int, default=30, help="length of the uncertainty curve")
    p.add_argument("--curve-out", help="write the uncertainty curve as CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte-Carlo sessions for a prefix-plus-tail policy")
    p.add_argument("instance")
    p.add_argument("--tail", required=True)
    p.add_argument("--prefix", default="")
    p.add_argument("--sessions", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sessions-out", help="write per-session rows as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--types", type=int, required=True)
    p.add_argument("--categories", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip", type=float, default=0.01)
    p.add_argument("--prior-std", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="build an instance from a ratings CSV")
    p.add_argument("--ratings", required=True)
    p.add_argument("--mode", choices=MODES, default="alternating-kmeans")
    p.add_argument("--user-clusters", type=int)
    p.add_argument("--item-clusters", type=int)
    p.add_argument("--user-assignments")
    p.add_argument("--item-assignments")
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--rating-max", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="instance JSON; metadata goes to <out>.meta.json")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("export-pomdp", help="write the instance as a .pomdp file")
    p.add_argument("instance")
    p.add_argument("--out", help="destination (default: stdout)")
    p.set_defaults(func=cmd_export_pomdp)

    p = sub.add_parser("bench", help="time branch-and-bound on generated instances")
    p.add_argument("--sizes", default="3x2,3x4,3x6,3x8", help="types x categories, comma separated")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--resamples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except UsageError as exc:
        print(f"rec-apc {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (RecApcError, OSError) as exc:
        print(f"rec-apc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rec-apc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
