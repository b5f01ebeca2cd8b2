"""Replicated benchmark runs with CSV + manifest output.

Each (problem, method, replication) run gets a seed derived by a stable hash
from the master seed, so re-running an identical configuration reproduces
byte-identical CSVs. Per-iteration wall times are recorded on the in-memory
traces but suppressed (written as 0.0) in the CSVs to keep that guarantee;
the manifest notes the suppression and carries the total elapsed time.
"""

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, bo, problems
from .errors import UnknownMethod, UnknownProblem
from .rng import stable_key

REGRET_SCHEMA = "cobo-regret-v1"
AGGREGATE_SCHEMA = "cobo-aggregate-v1"
REGRET_COLUMNS = ("problem", "method", "replication", "iteration",
                  "incumbent_f", "recommended_f", "regret", "log10_regret", "wall_ms")
AGGREGATE_COLUMNS = ("problem", "method", "iteration",
                     "mean_log10_regret", "half_width_95", "replications")
LOG10_FLOOR = 1e-12


@dataclass(frozen=True)
class BenchConfig:
    problems: tuple
    methods: tuple
    replications: int = 1
    budget: int = 10
    master_seed: int = 0
    out_dir: str = "results"
    jobs: int = 1
    loop: bo.LoopConfig = field(default_factory=bo.LoopConfig)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        object.__setattr__(self, "problems", tuple(self.problems))
        object.__setattr__(self, "methods", tuple(self.methods))
        for name in self.problems:
            validate_problem_name(name)
        for name in self.methods:
            if name not in bo.METHOD_NAMES:
                raise UnknownMethod(f"unknown method {name!r}; expected one of {bo.METHOD_NAMES}")


def validate_problem_name(name: str) -> None:
    if name in problems.problem_names():
        return
    base, sep, seed_text = name.partition("@")
    if sep and base in ("gp1", "gp2") and seed_text.isdigit():
        return
    raise UnknownProblem(f"unknown problem {name!r}; known: {', '.join(problems.problem_names())}")


def derive_seed(master_seed: int, problem: str, method: str, replication: int) -> int:
    """Stable 64-bit run seed; methods never share streams by accident."""
    return stable_key(master_seed, problem, method, replication)


def log10_regret(regret: float) -> float:
    return math.log10(max(regret, LOG10_FLOOR))


def _run_spec(spec):
    problem_name, method_name, replication, seed, budget, loop = spec
    problem = problems.get_problem(problem_name)
    trace = bo.run(problem, method_name, budget, seed, loop)
    rows = []
    for rec in trace.records:
        rows.append((problem_name, method_name, replication, rec.iteration,
                     rec.f_star, rec.f_rec, rec.regret, log10_regret(rec.regret), 0.0))
    return rows, trace.final_hypers


def _format(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, schema: str, columns, rows) -> None:
    with open(path, "w", newline="") as handle:
        handle.write(f"# schema: {schema}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def aggregate(rows_by_pair: dict, replications: int):
    """Per-iteration mean log10 regret with the 1.96 SD / sqrt(reps) half-width."""
    out = []
    for (problem_name, method_name), rows in rows_by_pair.items():
        by_iteration = {}
        for row in rows:
            by_iteration.setdefault(row[3], []).append(row[7])
        for iteration in sorted(by_iteration):
            values = np.asarray(by_iteration[iteration])
            mean = float(values.mean())
            sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
            half = 1.96 * sd / math.sqrt(values.size)
            out.append((problem_name, method_name, iteration, mean, half, values.size))
    return out


def run_bench(cfg: BenchConfig) -> dict:
    """Execute the configured runs; returns the written file paths."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    specs = []
    seeds = {}
    for problem_name in cfg.problems:
        for method_name in cfg.methods:
            for replication in range(cfg.replications):
                seed = derive_seed(cfg.master_seed, problem_name, method_name, replication)
                seeds[f"{problem_name}|{method_name}|{replication}"] = seed
                specs.append((problem_name, method_name, replication, seed, cfg.budget, cfg.loop))

    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_spec, specs))
    else:
        results = [_run_spec(spec) for spec in specs]

    rows_by_pair = {}
    final_hypers = {}
    for spec, (rows, hypers) in zip(specs, results):
        rows_by_pair.setdefault((spec[0], spec[1]), []).extend(rows)
        final_hypers[f"{spec[0]}|{spec[1]}|{spec[2]}"] = hypers

    paths = {}
    for (problem_name, method_name), rows in rows_by_pair.items():
        path = out_dir / f"regret_{problem_name}_{method_name}.csv"
        _write_csv(path, REGRET_SCHEMA, REGRET_COLUMNS, rows)
        paths[(problem_name, method_name)] = path

    aggregate_path = out_dir / "aggregate.csv"
    _write_csv(aggregate_path, AGGREGATE_SCHEMA, AGGREGATE_COLUMNS,
               aggregate(rows_by_pair, cfg.replications))

    problem_meta = {}
    for name in cfg.problems:
        problem = problems.get_problem(name)
        problem_meta[name] = {
            "dim": problem.dim,
            "num_outputs": problem.num_outputs,
            "f_max_true": problem.f_max_true,
            "x_ref": None if problem.x_ref is None else [float(v) for v in problem.x_ref],
            "domain_lower": [float(v) for v in problem.domain.lower],
            "domain_upper": [float(v) for v in problem.domain.upper],
        }
    manifest = {
        "schema": {"regret": REGRET_SCHEMA, "aggregate": AGGREGATE_SCHEMA},
        "version": __version__,
        "config": {
            "problems": list(cfg.problems),
            "methods": list(cfg.methods),
            "replications": cfg.replications,
            "budget": cfg.budget,
            "master_seed": cfg.master_seed,
            "jobs": cfg.jobs,
            "loop": dataclasses.asdict(cfg.loop),
        },
        "seeds": seeds,
        "problems": problem_meta,
        "final_hyperparameters": final_hypers,
        "log10_regret_floor": LOG10_FLOOR,
        "timing_suppressed": True,
        "degenerate_half_width": cfg.replications == 1,
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return {"runs": paths, "aggregate": aggregate_path, "manifest": manifest_path}
