"""Reading and writing point sets (CSV) and reports (JSON)."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or out-of-range input data."""


def ingest(path, fmt: str = "csv", normalize: bool = False, dim: int | None = None) -> np.ndarray:
    """Read a point set, one point per row.

    With ``normalize`` each column is min-max scaled to ``[0, 1]`` (a constant
    column maps to 0.5); otherwise values outside ``[0, 1]`` are rejected.
    Rows whose first cell is not numeric are allowed only as a header on the
    first line.
    """
    if fmt != "csv":
        raise DataError(f"unsupported input format {fmt!r}")
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    rows: list[list[float]] = []
    with path.open(newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                if line_no == 1 and not rows:
                    continue
                raise DataError(f"{path}:{line_no}: non-numeric value in row {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{line_no}: non-finite value")
            width = dim if dim is not None else (len(rows[0]) if rows else len(values))
            if len(values) != width:
                raise DataError(f"{path}:{line_no}: expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: file contains no data rows")
    x = np.asarray(rows, dtype=np.float64)
    if normalize:
        lo, hi = x.min(axis=0), x.max(axis=0)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (x - lo) / safe, 0.5)
    bad = np.argwhere((x < 0) | (x > 1))
    if bad.size:
        r, c = bad[0]
        raise DataError(
            f"{path}: row {r + 1}, column {c + 1} has value {x[r, c]!r} outside [0, 1]; use normalize"
        )
    return x


def format_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_points(points, path) -> None:
    """One point per line, shortest round-trip float formatting."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    with open(path, "w", newline="") as fh:
        for row in x:
            fh.write(format_row(row) + "\n")


def write_table(header: list[str], rows: list[list], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read JSON ({exc})") from None
