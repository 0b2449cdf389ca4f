"""CSV emission and parsing of sweep records."""

from __future__ import annotations

import math
from pathlib import Path

from .experiments import COLUMNS, DEGRADATION_COLUMNS, TEXT_COLUMNS, SweepResult


def format_value(v) -> str:
    """Full-precision scientific notation; ``nan``/``inf`` spelled out."""
    if isinstance(v, str):
        if "," in v or "\n" in v or "\r" in v:
            raise ValueError(f"text field {v!r} would need quoting")
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.16e}"


def _records(result):
    return result.records if isinstance(result, SweepResult) else list(result)


def csv_text(records, columns=COLUMNS) -> str:
    lines = [",".join(columns)]
    for rec in records:
        lines.append(",".join(format_value(rec[c]) for c in columns))
    return "\n".join(lines) + "\n"


def emit_csv(result, path, columns=None, where=None) -> Path:
    """Write ``result`` (a ``SweepResult`` or a list of records) as CSV.

    ``where`` optionally filters records by exact column values. Files are
    UTF-8 with LF line endings; an empty result gives a header-only file.
    """
    records = _records(result)
    if columns is None:
        columns = COLUMNS if not records or "knowledge" in records[0] else DEGRADATION_COLUMNS
    if where:
        records = [r for r in records if all(r[k] == v for k, v in where.items())]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(records, columns))
    return path


def parse_csv(path) -> list[dict]:
    """Inverse of :func:`emit_csv`; numeric fields come back as floats."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty file, expected a header row")
    header = lines[0].split(",")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}")
        out.append({name: (val if name in TEXT_COLUMNS else float(val)) for name, val in zip(header, fields)})
    return out
