"""Render regret-convergence figures from aggregate benchmark CSVs.

Input files carry a `# schema: cobo-aggregate-v1` header line followed by a
CSV table with columns problem, method, iteration, mean_log10_regret,
half_width_95, replications. One figure is produced per problem: a curve of
mean log10 regret against function evaluations after the initial stage for
each method, with a shaded band of plus/minus the reported half-width.
"""

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_SCHEMA = "cobo-aggregate-v1"
REQUIRED_COLUMNS = ("problem", "method", "iteration",
                    "mean_log10_regret", "half_width_95", "replications")

# deterministic styling keyed by method name
METHOD_LABELS = {
    "ei_cf": "EI-CF",
    "pi_cf": "PI-CF",
    "random_cf": "Random-CF",
    "ei": "EI",
    "pi": "PI",
    "random": "Random",
}
METHOD_STYLES = {
    "ei_cf": {"color": "#d62728", "linestyle": "-"},
    "pi_cf": {"color": "#1f77b4", "linestyle": "-"},
    "random_cf": {"color": "#2ca02c", "linestyle": "-"},
    "ei": {"color": "#d62728", "linestyle": "--"},
    "pi": {"color": "#1f77b4", "linestyle": "--"},
    "random": {"color": "#2ca02c", "linestyle": "--"},
}


class SchemaMismatch(Exception):
    """The CSV does not declare the expected schema version."""


class MissingColumn(Exception):
    """A required column is absent from the CSV header."""


@dataclass
class Series:
    method: str
    iterations: list = field(default_factory=list)
    means: list = field(default_factory=list)
    half_widths: list = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return all(h == 0.0 for h in self.half_widths)


@dataclass(frozen=True)
class CurveSpec:
    """One figure: a problem and the methods to draw for it."""

    problem: str
    methods: tuple
    y_label: str = "log10(regret)"
    x_label: str = "function evaluations after initial stage"


def read_aggregate(path) -> dict:
    """Parse one aggregate CSV into {problem: {method: Series}}."""
    path = Path(path)
    with open(path, newline="") as handle:
        first = handle.readline().strip()
        if first != f"# schema: {EXPECTED_SCHEMA}":
            raise SchemaMismatch(f"{path}: expected '# schema: {EXPECTED_SCHEMA}', got {first!r}")
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise MissingColumn(f"{path}: missing column {column!r}")
        table = {}
        for row in reader:
            series = table.setdefault(row["problem"], {}).setdefault(
                row["method"], Series(method=row["method"]))
            series.iterations.append(int(row["iteration"]))
            series.means.append(float(row["mean_log10_regret"]))
            series.half_widths.append(float(row["half_width_95"]))
    return table


def _merge(tables) -> dict:
    merged = {}
    for table in tables:
        for problem, methods in table.items():
            slot = merged.setdefault(problem, {})
            for method, series in methods.items():
                if method in slot:
                    slot[method].iterations.extend(series.iterations)
                    slot[method].means.extend(series.means)
                    slot[method].half_widths.extend(series.half_widths)
                else:
                    slot[method] = series
    return merged


def render(csv_paths, out_dir, fmt: str = "png", methods=()) -> list:
    """Render one figure per problem; returns metadata for each figure.

    methods filters which curves are drawn; empty means every method present
    in the CSVs. Re-rendering overwrites outputs idempotently.
    """
    if fmt not in ("png", "pdf"):
        raise ValueError(f"unsupported format {fmt!r}; use png or pdf")
    if isinstance(csv_paths, (str, Path)):
        csv_paths = [csv_paths]
    table = _merge(read_aggregate(p) for p in csv_paths)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rendered = []
    for problem in sorted(table):
        available = table[problem]
        wanted = tuple(methods) if methods else tuple(sorted(available))
        for method in wanted:
            if method not in available:
                raise ValueError(f"method {method!r} not present in the CSV for {problem!r}")
        spec = CurveSpec(problem=problem, methods=wanted)

        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        info = {"problem": problem, "series": []}
        for method in spec.methods:
            series = available[method]
            order = sorted(range(len(series.iterations)), key=lambda i: series.iterations[i])
            xs = [series.iterations[i] for i in order]
            ys = [series.means[i] for i in order]
            hw = [series.half_widths[i] for i in order]
            style = METHOD_STYLES.get(method, {})
            label = METHOD_LABELS.get(method, method)
            ax.plot(xs, ys, label=label, **style)
            ax.fill_between(xs, [y - h for y, h in zip(ys, hw)],
                            [y + h for y, h in zip(ys, hw)],
                            alpha=0.2, color=style.get("color"))
            if series.degenerate:
                print(f"warning: {problem}/{method} has zero-width error bands "
                      "(single replication)", file=sys.stderr)
            info["series"].append({"method": method, "label": label,
                                   "points": len(xs), "degenerate": series.degenerate})
        ax.set_xlabel(spec.x_label)
        ax.set_ylabel(spec.y_label)
        ax.set_title(problem)
        ax.legend()
        fig.tight_layout()
        out_path = out_dir / f"{problem}.{fmt}"
        fig.savefig(out_path)
        plt.close(fig)
        info["path"] = out_path
        rendered.append(info)
    return rendered


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="regret-plots",
                                     description="figures from aggregate regret CSVs")
    parser.add_argument("csv", nargs="+", help="aggregate CSV path(s)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=("png", "pdf"), default="png")
    parser.add_argument("--method", default="",
                        help="comma-separated method filter (default: all)")
    args = parser.parse_args(argv)
    methods = tuple(m for m in args.method.split(",") if m)
    try:
        rendered = render(args.csv, args.out, args.format, methods)
    except (SchemaMismatch, MissingColumn, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for info in rendered:
        print(f"wrote {info['path']} ({len(info['series'])} series)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
