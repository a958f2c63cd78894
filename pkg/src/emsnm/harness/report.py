"""Latency tables and report files.

Markdown tables follow the layout of the per-node timing tables: an ``S. no``
column, one ``Time<n>`` column per polled node, one row per round and an
``Average`` row rounded to whole milliseconds. CSV files carry the same
numbers at full precision.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from emsnm._format import fmt_number
from emsnm.costmodel import CostBreakdown
from emsnm.simengine import TrafficLedger, ledger_to_csv

FORMATS = ("csv", "markdown")


@dataclass
class ReportTable:
    strategy: str
    nodes: tuple[int, ...]
    rows: list[dict[int, float]] = field(default_factory=list)

    @classmethod
    def from_rounds(cls, strategy: str, rounds: Iterable[Iterable]) -> ReportTable:
        """Merge each round's per-domain results into one row keyed by node."""
        rows = []
        for round_results in rounds:
            row: dict[int, float] = {}
            for res in round_results:
                row.update(res.per_node_latency)
            rows.append(dict(sorted(row.items())))
        nodes = tuple(sorted({n for row in rows for n in row}))
        return cls(strategy, nodes, rows)

    @property
    def average(self) -> dict[int, float]:
        out = {}
        for n in self.nodes:
            samples = [row[n] for row in self.rows if n in row]
            out[n] = sum(samples) / len(samples)
        return out

    @property
    def overall_mean(self) -> float:
        samples = [v for row in self.rows for v in row.values()]
        return sum(samples) / len(samples) if samples else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", *(f"Time{n}" for n in self.nodes)])
        for i, row in enumerate(self.rows, 1):
            writer.writerow([i, *(fmt_number(row[n]) if n in row else "" for n in self.nodes)])
        avg = self.average
        writer.writerow(["average", *(fmt_number(avg[n]) for n in self.nodes)])
        return buf.getvalue()

    def to_markdown(self) -> str:
        header = ["S. no", *(f"Time{n}" for n in self.nodes)]
        lines = [f"### {self.strategy}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for i, row in enumerate(self.rows, 1):
            cells = [f"{i}.", *(f"{row[n]:.0f}" if n in row else "" for n in self.nodes)]
            lines.append("| " + " | ".join(cells) + " |")
        avg = self.average
        lines.append("| Average | " + " | ".join(f"{avg[n]:.0f}" for n in self.nodes) + " |")
        if self.nodes:
            names = ", ".join(f"Time{n}" for n in self.nodes)
            lines += ["", f"{names}: round latency of node {', '.join(map(str, self.nodes))}. All times in milliseconds."]
        return "\n".join(lines) + "\n"


SUMMARY_COLUMNS = ("strategy", "nodes", "rounds", "mean_latency_ms")


def summary_csv(tables: Mapping[str, ReportTable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for name, table in tables.items():
        writer.writerow([name, len(table.nodes), len(table.rows), fmt_number(table.overall_mean)])
    return buf.getvalue()


def breakdown_csv(breakdowns: Mapping[str, CostBreakdown]) -> str:
    """One row per index convention."""
    buf = io.StringIO()
    writer = None
    for convention, bd in breakdowns.items():
        record = {"convention": convention, **bd.to_record()}
        if writer is None:
            writer = csv.DictWriter(buf, fieldnames=list(record), lineterminator="\n")
            writer.writeheader()
        writer.writerow(record)
    return buf.getvalue()


def emit_report(
    tables: Mapping[str, ReportTable],
    ledger: TrafficLedger,
    breakdown: CostBreakdown | Mapping[str, CostBreakdown],
    out_dir: str | Path,
    formats: Sequence[str] = FORMATS,
    comparison_text: str | None = None,
    extra_files: Mapping[str, str] | None = None,
) -> list[Path]:
    """Write all report files into ``out_dir`` and return their paths.

    Files: ``report_<strategy>.csv`` / ``.md`` per table and format,
    ``summary.csv``, ``ledger.csv``, ``cost_breakdown.csv`` and, when given,
    ``comparison.txt`` plus any ``extra_files`` (name -> text). Output bytes
    depend only on the inputs.
    """
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, str] = {}
    for name, table in tables.items():
        if "csv" in formats:
            files[f"report_{name}.csv"] = table.to_csv()
        if "markdown" in formats:
            files[f"report_{name}.md"] = table.to_markdown()
    files["summary.csv"] = summary_csv(tables)
    files["ledger.csv"] = ledger_to_csv(ledger.records)
    if isinstance(breakdown, CostBreakdown):
        breakdown = {"per_child": breakdown}
    files["cost_breakdown.csv"] = breakdown_csv(breakdown)
    if comparison_text is not None:
        files["comparison.txt"] = comparison_text
    files.update(extra_files or {})

    written = []
    for name, text in files.items():
        path = out / name
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
