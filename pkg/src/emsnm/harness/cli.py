"""Command line entry point: ``emsnm SCENARIO [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from emsnm.emsstore import to_csv
from emsnm.errors import EmsnmError, ParseError, ValidationError
from emsnm.harness.report import emit_report
from emsnm.harness.runner import compare_run, run_scenario
from emsnm.harness.scenario import load_scenario

log = logging.getLogger("emsnm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emsnm",
        description="Run a network-management scenario and write latency tables, the traffic ledger and the cost breakdown.",
    )
    parser.add_argument("scenario", help="path to a scenario file")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--rounds", type=int, help="override the number of management rounds")
    parser.add_argument("-o", "--out", default="out", help="output directory (default: %(default)s)")
    parser.add_argument(
        "--format",
        choices=["csv", "markdown", "both"],
        default="both",
        help="latency table format (default: %(default)s)",
    )
    parser.add_argument(
        "--compare",
        action="store_true",
        help="exit with status 1 if simulated traffic differs from the cost model",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario).with_overrides(seed=args.seed, rounds=args.rounds)
    except (ParseError, ValidationError) as exc:
        print(f"emsnm: {exc}", file=sys.stderr)
        return 2
    try:
        result = run_scenario(scenario)
    except EmsnmError as exc:
        print(f"emsnm: {exc}", file=sys.stderr)
        return 2

    comparison = compare_run(result)
    formats = ("csv", "markdown") if args.format == "both" else (args.format,)
    tables = {s.value: t for s, t in result.tables.items()}
    stores = {f"ems_domain{d}.csv": to_csv(store) for d, store in result.stores.items()}
    try:
        written = emit_report(
            tables,
            result.ledger,
            {"per_child": result.breakdown, "strict": result.strict_breakdown},
            args.out,
            formats=formats,
            comparison_text=comparison.to_text(),
            extra_files=stores,
        )
    except OSError as exc:
        print(f"emsnm: cannot write reports: {exc}", file=sys.stderr)
        return 2

    for name, table in tables.items():
        print(f"{name:<8} mean latency {table.overall_mean:8.3f} ms over {len(table.nodes)} nodes x {len(table.rows)} rounds")
    if result.staleness_audit:
        worst = max(s.staleness_s for s in result.staleness_audit)
        print(f"hybrid   max replica staleness {float(worst):.3f} s")
    print(f"model vs simulation: {'PASS' if comparison.ok else 'FAIL'}")
    log.info("wrote %d files to %s", len(written), args.out)

    if args.compare and not comparison.ok:
        for entry in comparison.mismatches:
            print(f"mismatch {entry.name}: simulated {entry.simulated} model {entry.model}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
