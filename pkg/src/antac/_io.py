"""CSV and manifest serialization.

All data files are plain numeric CSV with a header row. Floats are written
with shortest round-trip formatting, so identical numbers always serialize to
identical bytes. Missing or non-numeric cells are rejected outright.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_matrix(path: Path, matrix: np.ndarray, prefix: str = "c") -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"{prefix}{k + 1}" for k in range(matrix.shape[1])])
        for row in matrix:
            writer.writerow([format_value(v) for v in row])


def read_matrix(path: Path) -> np.ndarray:
    """Parse a numeric CSV with one header row; rejects ragged rows and
    missing values (no imputation)."""
    path = Path(path)
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        ncols = len([h for h in header if h != ""])
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) == 0 or (len(raw) == 1 and raw[0] == ""):
                continue
            if len(raw) != ncols:
                raise DomainError(
                    f"{path}:{lineno}: expected {ncols} columns, found {len(raw)}"
                )
            parsed = []
            for col, cell in enumerate(raw, start=1):
                cell = cell.strip()
                if cell == "":
                    raise DomainError(f"{path}:{lineno}: missing value in column {col}")
                try:
                    value = float(cell)
                except ValueError:
                    raise DomainError(
                        f"{path}:{lineno}: non-numeric value {cell!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DomainError(f"{path}:{lineno}: non-finite value {cell!r}")
                parsed.append(value)
            rows.append(parsed)
    if ncols == 0:
        return np.zeros((len(rows), 0))
    return np.array(rows, dtype=np.float64).reshape(len(rows), ncols)


EDGE_COLUMNS = (
    "i",
    "j",
    "omega_ij",
    "omega_ii",
    "omega_jj",
    "se",
    "z",
    "pvalue",
    "qvalue",
    "partial_corr",
    "selected",
)


def write_edges(path: Path, rows: Sequence[Mapping]) -> None:
    """Edge table with 1-based node indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGE_COLUMNS)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in EDGE_COLUMNS])


def read_edges(path: Path) -> list[dict]:
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in EDGE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DomainError(f"{path}: missing edge columns {missing}")
        for lineno, raw in enumerate(reader, start=2):
            try:
                rec = {
                    "i": int(raw["i"]),
                    "j": int(raw["j"]),
                    "selected": int(raw["selected"]),
                }
                for c in EDGE_COLUMNS[2:-1]:
                    rec[c] = float(raw[c])
            except (TypeError, ValueError):
                raise DomainError(f"{path}:{lineno}: malformed edge row") from None
            out.append(rec)
    return out


def write_manifest(path: Path, entries: Mapping) -> None:
    """Flat key=value text, keys sorted, reproducible byte-for-byte."""
    with open(path, "w") as fh:
        for key in sorted(entries):
            fh.write(f"{key}={entries[key]}\n")
