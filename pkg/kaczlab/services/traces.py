"""
CSV traces and the run summary.

Trace files have the header ``iter,elapsed_seconds,rel_error,residual``; reals
are written with 17 significant digits and '.' as decimal separator, missing
metrics as empty fields.  One file per (variant, method, γ, seed) run.
"""
import csv
import logging
import os
from collections.abc import Iterable, Sequence
from pathlib import Path

from pydantic import BaseModel

from kaczlab.errors import TraceFormatError
from kaczlab.models.solve import TraceRecord

log = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "elapsed_seconds", "rel_error", "residual")

SUMMARY_HEADER = (
    "variant",
    "method",
    "gamma",
    "seed",
    "status",
    "iterations",
    "skipped",
    "final_rel_error",
    "final_residual",
    "wall_seconds",
    "build_seconds",
    "used_pseudoinverse",
    "trace_file",
    "error",
)


def format_real(value: float | None) -> str:
    return "" if value is None else format(float(value), ".17g")


def _parse_real(text: str, path: str, line: int, column: str) -> float | None:
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(path, line, f"column {column!r}: {text!r} is not a number") from None


def run_label(method: str, gamma: float | None, seed: int, variant: str = "") -> str:
    """File-name stem of a run, e.g. ``sigma=0.01__preconditioned_g2__seed3``."""
    method_part = method if gamma is None else f"{method}_g{format(gamma, 'g')}"
    stem = f"{method_part}__seed{seed}"
    return f"{variant}__{stem}" if variant else stem


# ── Traces ────────────────────────────────────────────────────────────────────

def write_trace_csv(path: str | os.PathLike, trace: Iterable[TraceRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in trace:
            writer.writerow(
                (rec.iter, format_real(rec.elapsed_seconds), format_real(rec.rel_error), format_real(rec.residual))
            )
    return path


def read_trace_csv(path: str | os.PathLike) -> list[TraceRecord]:
    """Parse a trace file; raises TraceFormatError on any malformed line."""
    name = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_HEADER:
            raise TraceFormatError(name, 1, f"expected header {','.join(TRACE_HEADER)}")
        records: list[TraceRecord] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise TraceFormatError(name, line_no, f"expected {len(TRACE_HEADER)} fields, got {len(row)}")
            try:
                it = int(row[0])
            except ValueError:
                raise TraceFormatError(name, line_no, f"iter {row[0]!r} is not an integer") from None
            elapsed = _parse_real(row[1], name, line_no, "elapsed_seconds")
            if elapsed is None:
                raise TraceFormatError(name, line_no, "elapsed_seconds is required")
            records.append(
                TraceRecord(
                    iter=it,
                    elapsed_seconds=elapsed,
                    rel_error=_parse_real(row[2], name, line_no, "rel_error"),
                    residual=_parse_real(row[3], name, line_no, "residual"),
                )
            )
    if not records:
        raise TraceFormatError(name, 2, "trace has no records")
    return records


# ── Summary ───────────────────────────────────────────────────────────────────

class SummaryRow(BaseModel):
    variant: str = ""
    method: str
    gamma: float | None = None
    seed: int
    status: str = ""
    iterations: int = 0
    skipped: int = 0
    final_rel_error: float | None = None
    final_residual: float | None = None
    wall_seconds: float | None = None
    build_seconds: float | None = None
    used_pseudoinverse: bool | None = None
    trace_file: str = ""
    error: str = ""

    def as_csv_row(self) -> list[str]:
        values = self.model_dump()
        out = []
        for key in SUMMARY_HEADER:
            value = values[key]
            if isinstance(value, bool):
                out.append("true" if value else "false")
            elif isinstance(value, float):
                out.append(format_real(value))
            elif value is None:
                out.append("")
            else:
                out.append(str(value))
        return out


def write_summary_csv(path: str | os.PathLike, rows: Sequence[SummaryRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for row in rows:
            writer.writerow(row.as_csv_row())
    log.info("Summary written: %s (%d runs)", path, len(rows))
    return path


def read_summary_csv(path: str | os.PathLike) -> list[SummaryRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            cleaned = {k: (v if v != "" else None) for k, v in raw.items()}
            for key in ("variant", "status", "trace_file", "error"):
                cleaned[key] = cleaned.get(key) or ""
            rows.append(SummaryRow.model_validate(cleaned))
    return rows
