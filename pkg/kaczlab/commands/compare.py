"""
compare <trace-dir>

Prints, per grid variant, the median metric of each method at shared time
checkpoints, when each preconditioned method first drops below plain
Kaczmarz, and the smallest γ whose final error beats plain.
"""
import argparse

from kaczlab.commands._base import Command
from kaczlab.services.experiment import CompareReport, compare_traces
from kaczlab.services.traces import format_real


def _cell(value: float | None) -> str:
    return "-" if value is None else f"{value:.3e}"


def render_report(report: CompareReport) -> str:
    lines: list[str] = []
    for v in report.variants:
        lines.append(f"== {v.variant or 'default'} ==")
        header = ["method", "runs"] + [f"t={t:.3g}s" for t in v.checkpoints] + ["final"]
        rows = [
            [g.label, str(len(g.curves))] + [_cell(g.median_at(t)) for t in v.checkpoints] + [_cell(g.final)]
            for g in v.groups
        ]
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        for row in [header, *rows]:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if not v.checkpoints:
            lines.append("(traces do not overlap in time; no checkpoints)")
        for label, t in v.crossings.items():
            lines.append(f"{label} crosses below plain at " + ("never" if t is None else f"{format_real(t)}s"))
        if v.crossings or v.min_winning_gamma is not None:
            gamma = "none" if v.min_winning_gamma is None else f"{v.min_winning_gamma:g}"
            lines.append(f"smallest gamma beating plain: {gamma}")
        lines.append("")
    for warning in report.warnings:
        lines.append(f"skipped: {warning}")
    return "\n".join(lines).rstrip() + "\n"


def _configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("trace_dir", help="directory written by 'run'")


def _handle(args: argparse.Namespace) -> int:
    report = compare_traces(args.trace_dir)
    if not report.variants:
        print("no readable traces in " + args.trace_dir)
        return 2
    print(render_report(report), end="")
    return 0


command = Command("compare", "tabulate traces written by 'run'", _configure, _handle)
