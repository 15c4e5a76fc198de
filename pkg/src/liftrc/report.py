"""Scaling report: lifted vs ground work on a two-parfactor family.

The family couples three unary predicates through a shared one and an
inequality, which keeps the grounding's search tree exponential in the
population size while the lifted engine's counting branches stay
polynomial.  The report runs both engines over population-size sweeps
and writes a CSV plus matplotlib figures.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

from .dsl import parse_model
from .model import Model
from .query import partition_function

SEPARATION_TEMPLATE = """
population person {n}
prv f(person)
prv g(person)
prv h(person)
prv e()
parfactor [x:person] on f(x), g(x), e() {{
  true true true -> 1/2    true true false -> 1/3
  true false true -> 2/3   true false false -> 1/5
  false true true -> 2/5   false true false -> 3/5
  false false true -> 4/5  false false false -> 1/7
}}
parfactor [x:person, y:person] where x != y on h(y), g(x) {{
  true true -> 2/7   true false -> 3/7
  false true -> 4/7  false false -> 5/7
}}
"""


def separation_model(n: int) -> Model:
    """The complexity-separation family at population size n."""
    return parse_model(SEPARATION_TEMPLATE.format(n=n))


def run_scaling(lifted_sizes: Sequence[int], ground_sizes: Sequence[int],
                numeric: str = "logspace", precision: int = 50,
                ground_cap: int = 1_000_000) -> list[dict]:
    """Evaluate the family's total weight per engine and size; returns stat rows."""
    rows: list[dict] = []
    for engine, sizes in (("lifted", lifted_sizes), ("ground", ground_sizes)):
        for n in sizes:
            reports = partition_function(
                separation_model(n), engine=engine, numeric=numeric,
                precision=precision, ground_cap=ground_cap)
            stats = reports[engine].stats
            rows.append({
                "engine": engine,
                "n": n,
                "calls": stats.calls,
                "branches": stats.branches,
                "cache_hits": stats.cache_hits,
                "cache_misses": stats.cache_misses,
                "case3_events": stats.case3_events,
                "wall_ms": round(stats.wall_ms, 3),
            })
    return rows


FIELDS = ("engine", "n", "calls", "branches", "cache_hits", "cache_misses",
          "case3_events", "wall_ms")


def write_scaling_csv(rows: Sequence[dict], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def render_scaling_figures(rows: Sequence[dict], out_dir: Path) -> list[Path]:
    """Render call-count and wall-time figures next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    paths: list[Path] = []
    series: dict[str, tuple[list[int], dict[str, list[float]]]] = {}
    for engine in ("lifted", "ground"):
        engine_rows = sorted((r for r in rows if r["engine"] == engine), key=lambda r: r["n"])
        series[engine] = (
            [r["n"] for r in engine_rows],
            {f: [r[f] for r in engine_rows] for f in ("calls", "wall_ms")},
        )
    for metric, label, fname in (
        ("calls", "recursive calls", "scaling_calls.png"),
        ("wall_ms", "wall time [ms]", "scaling_time.png"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for engine, marker in (("lifted", "o"), ("ground", "s")):
            ns, metrics = series[engine]
            if ns:
                ax.semilogy(ns, [max(v, 1e-9) for v in metrics[metric]],
                            marker=marker, label=engine)
        ax.set_xlabel("population size n")
        ax.set_ylabel(label)
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        target = out_dir / fname
        fig.savefig(target, dpi=150)
        plt.close(fig)
        paths.append(target)
    return paths


def write_report(out_dir: Path, lifted_sizes: Sequence[int], ground_sizes: Sequence[int],
                 numeric: str = "logspace", precision: int = 50) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = run_scaling(lifted_sizes, ground_sizes, numeric=numeric, precision=precision)
    csv_path = out_dir / "scaling.csv"
    write_scaling_csv(rows, csv_path)
    figures = render_scaling_figures(rows, out_dir)
    return {"rows": rows, "csv": csv_path, "figures": figures}
