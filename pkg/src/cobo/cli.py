"""Command-line harness.

Subcommands: `bench` (replicated experiment grid to CSV + manifest), `run`
(single run, prints the trace), `list-problems`. Exit codes: 0 ok, 1 runtime
failure, 2 usage error.
"""

import argparse
import dataclasses
import sys

import numpy as np

from . import bench, bo, problems
from .errors import CoboError, UnknownMethod, UnknownProblem, UsageError


def _split(text: str) -> tuple:
    return tuple(part for part in text.split(",") if part)


def _add_common(parser):
    parser.add_argument("--budget", type=int, default=10,
                        help="evaluations after the initial stage")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--mc-samples", type=int, default=None,
                        help="MC samples for candidate ranking and recommendation")
    parser.add_argument("--hyper-samples", type=int, default=10,
                        help="hyperparameter posterior samples per fit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobo",
                                     description="Bayesian optimization of composite objectives")
    sub = parser.add_subparsers(dest="command", required=True)

    bench_p = sub.add_parser("bench", help="replicated benchmark grid")
    bench_p.add_argument("--problem", required=True, help="comma-separated problem names")
    bench_p.add_argument("--method", required=True, help="comma-separated method names")
    bench_p.add_argument("--reps", type=int, default=1, help="replications per pair")
    bench_p.add_argument("--out", required=True, help="output directory")
    bench_p.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(bench_p)

    run_p = sub.add_parser("run", help="single run, prints the trace")
    run_p.add_argument("--problem", required=True)
    run_p.add_argument("--method", default="ei_cf")
    _add_common(run_p)

    sub.add_parser("list-problems", help="show the problem catalog")
    return parser


def _loop_config(args) -> bo.LoopConfig:
    overrides = {"ensemble_size": args.hyper_samples}
    if args.mc_samples is not None:
        overrides["sga_ranking_samples"] = args.mc_samples
        overrides["recommend_samples"] = args.mc_samples
    return dataclasses.replace(bo.LoopConfig(), **overrides)


def cli_parse(argv) -> bench.BenchConfig:
    """Parse a `bench` argument vector into a validated configuration."""
    args = build_parser().parse_args(argv)
    if args.command != "bench":
        raise UsageError("cli_parse handles the bench subcommand")
    return bench.BenchConfig(
        problems=_split(args.problem), methods=_split(args.method),
        replications=args.reps, budget=args.budget, master_seed=args.seed,
        out_dir=args.out, jobs=args.jobs, loop=_loop_config(args))


def _cmd_bench(args) -> int:
    cfg = bench.BenchConfig(
        problems=_split(args.problem), methods=_split(args.method),
        replications=args.reps, budget=args.budget, master_seed=args.seed,
        out_dir=args.out, jobs=args.jobs, loop=_loop_config(args))
    paths = bench.run_bench(cfg)
    print(f"wrote {len(paths['runs'])} run CSVs, {paths['aggregate']}, {paths['manifest']}")
    return 0


def _cmd_run(args) -> int:
    bench.validate_problem_name(args.problem)
    if args.method not in bo.METHOD_NAMES:
        raise UnknownMethod(f"unknown method {args.method!r}; expected one of {bo.METHOD_NAMES}")
    problem = problems.get_problem(args.problem)
    trace = bo.run(problem, args.method, args.budget, args.seed, _loop_config(args))
    print(f"problem={trace.problem} method={trace.method} seed={trace.seed} "
          f"design={trace.design_x.shape[0]} budget={trace.budget}")
    for rec in trace.records:
        x_text = "-" if rec.x is None else np.array2string(rec.x, precision=4, separator=",")
        print(f"iter={rec.iteration:3d} x={x_text} f={rec.f if rec.f is None else round(rec.f, 6)} "
              f"best={rec.f_star:.6g} recommended_f={rec.f_rec:.6g} "
              f"regret={rec.regret:.3e} wall_ms={rec.wall_ms:.0f}")
    return 0


def _cmd_list(_args) -> int:
    for name in problems.problem_names():
        problem = problems.get_problem(name)
        print(f"{name}: d={problem.dim} m={problem.num_outputs} f_max={problem.f_max_true!r}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_list(args)
    except (UsageError, UnknownProblem, UnknownMethod) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CoboError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
