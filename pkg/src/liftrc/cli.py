"""Command-line interface.

    liftrc run model.lpm [--engine ground|lifted|both] [--numeric exact|logspace]
                         [--precision N] [--stats out.json] [--seed N]
                         [--ground-cap N] [--debug-check-disconnection]
    liftrc scaling [--out-dir DIR] [--lifted-sizes 4,8,16,32,64] [--ground-sizes 2-8]

Exit codes: 0 ok, 1 usage or parse error, 2 not liftable, 3 zero-probability
evidence, 4 engine disagreement, 5 ground oracle infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .dsl import ModelSyntaxError, parse_model
from .grounding import OracleInfeasibleError
from .lifted_engine import NotLiftableError
from .numbers import ExactMode, make_mode
from .query import (
    EngineDisagreementError,
    EngineReport,
    Query,
    ZeroProbabilityEvidenceError,
    answer_query,
    partition_function,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_LIFTABLE = 2
EXIT_ZERO_EVIDENCE = 3
EXIT_DISAGREEMENT = 4
EXIT_INFEASIBLE = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftrc",
                                     description="Exact lifted inference over parfactor models")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="answer the queries in a model file")
    run.add_argument("file", type=Path, help="model file (.lpm)")
    run.add_argument("--engine", choices=("ground", "lifted", "both"), default="lifted")
    run.add_argument("--numeric", choices=("exact", "logspace"), default="exact")
    run.add_argument("--precision", type=int, default=50,
                     help="log-space precision in decimal digits")
    run.add_argument("--stats", type=Path, default=None,
                     help="write per-query run statistics as JSON")
    run.add_argument("--seed", type=int, default=None,
                     help="seed for randomized branch-selection heuristics")
    run.add_argument("--ground-cap", type=int, default=100_000,
                     help="maximum ground factors before the oracle refuses")
    run.add_argument("--debug-check-disconnection", action="store_true",
                     help="verify every disconnection step against a surrogate grounding")

    scaling = sub.add_parser("scaling", help="write the lifted-vs-ground scaling report")
    scaling.add_argument("--out-dir", type=Path, default=Path("scaling-report"))
    scaling.add_argument("--lifted-sizes", default="4,8,16,32,64")
    scaling.add_argument("--ground-sizes", default="2,3,4,5,6,7,8")
    scaling.add_argument("--numeric", choices=("exact", "logspace"), default="logspace")
    scaling.add_argument("--precision", type=int, default=50)
    return parser


def _render_value(mode, value) -> str:
    if isinstance(mode, ExactMode):
        frac = value
        return f"{frac.numerator}/{frac.denominator} ({mode.to_decimal_string(frac)})" \
            if frac.denominator != 1 else f"{frac.numerator}"
    return str(value)


def _stats_record(query_name: str, report: EngineReport, mode) -> dict:
    if report.distribution:
        value = {v: _render_distribution_entry(mode, p) for v, p in report.distribution.items()}
    else:
        value = {("total" if not k else k): _render_value(mode, w)
                 for k, w in report.weights.items()}
    stats = report.stats
    return {
        "query": query_name,
        "engine": report.engine,
        "value": value,
        "calls": stats.calls,
        "branches": stats.branches,
        "cacheHits": stats.cache_hits,
        "cacheMisses": stats.cache_misses,
        "case3Events": stats.case3_events,
        "wallMs": round(stats.wall_ms, 3),
    }


def _render_distribution_entry(mode, prob) -> str:
    if isinstance(prob, Fraction):
        return f"{prob.numerator}/{prob.denominator}"
    return str(prob)


def _print_distribution(mode, target, report: EngineReport) -> None:
    print(f"{target} [{report.engine}]")
    for v, prob in report.distribution.items():
        if isinstance(prob, Fraction):
            decimal = mode.to_decimal_string(prob)
            print(f"  {v:<10} {prob.numerator}/{prob.denominator}  ({decimal})")
        else:
            print(f"  {v:<10} {prob}")


def _cmd_run(args) -> int:
    try:
        text = args.file.read_text()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        model = parse_model(text)
    except ModelSyntaxError as exc:
        print(f"{args.file}:{exc.line}:{exc.col}: error: {exc.message}", file=sys.stderr)
        return EXIT_USAGE

    mode = make_mode(args.numeric, args.precision)
    records: list[dict] = []
    try:
        if not model.queries:
            reports = partition_function(
                model, engine=args.engine, numeric=args.numeric, precision=args.precision,
                ground_cap=args.ground_cap,
                debug_check_disconnection=args.debug_check_disconnection)
            print("no queries; reporting total weight")
            for report in reports.values():
                print(f"  total [{report.engine}] = {_render_value(mode, report.weights[''])}")
                records.append(_stats_record("<total>", report, mode))
            if args.engine == "both" and isinstance(mode, ExactMode):
                if reports["ground"].weights[""] != reports["lifted"].weights[""]:
                    raise EngineDisagreementError("total weights differ between engines")
        for atom in model.queries:
            query = Query(
                target=atom,
                observations=dict(model.observations),
                engine=args.engine,
                numeric=args.numeric,
                precision=args.precision,
                ground_cap=args.ground_cap,
                debug_check_disconnection=args.debug_check_disconnection,
                seed=args.seed,
            )
            answer = answer_query(model, query)
            for report in answer.reports.values():
                _print_distribution(mode, atom, report)
                records.append(_stats_record(str(atom), report, mode))
    except NotLiftableError as exc:
        print(f"error: not liftable: {exc}", file=sys.stderr)
        return EXIT_NOT_LIFTABLE
    except ZeroProbabilityEvidenceError as exc:
        print(f"error: zero-probability evidence: {exc}", file=sys.stderr)
        return EXIT_ZERO_EVIDENCE
    except EngineDisagreementError as exc:
        print(f"error: engine disagreement: {exc}", file=sys.stderr)
        return EXIT_DISAGREEMENT
    except OracleInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE

    if args.stats is not None:
        args.stats.write_text(json.dumps(records, indent=2) + "\n")
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    sizes: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "-" in chunk:
            lo, hi = chunk.split("-", 1)
            sizes.extend(range(int(lo), int(hi) + 1))
        else:
            sizes.append(int(chunk))
    return sizes


def _cmd_scaling(args) -> int:
    from .report import write_report

    result = write_report(
        args.out_dir,
        _parse_sizes(args.lifted_sizes),
        _parse_sizes(args.ground_sizes),
        numeric=args.numeric,
        precision=args.precision,
    )
    print(f"wrote {result['csv']}")
    for path in result["figures"]:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "scaling":
        return _cmd_scaling(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
