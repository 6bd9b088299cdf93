"""CSV readers and writers shared by the other modules.

All numbers are written with 17 significant digits so that float64 values
survive a write/read round trip unchanged.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def write_matrix(path, matrix):
    """Write a 2-D array as header-less CSV (one matrix row per line)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, matrix, delimiter=",", fmt=FLOAT_FMT)
    return Path(path)


def read_matrix(path):
    matrix = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{path}: matrix contains non-finite entries")
    return matrix


def write_columns(path, columns):
    """Write named 1-D columns of equal length as CSV with a header line.

    ``columns`` maps header names to arrays (or to sequences of strings for
    label columns such as the strategy name).
    """
    names = list(columns)
    data = [columns[name] for name in names]
    lengths = {len(col) for col in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([_fmt(v) for v in row])
    return Path(path)


def read_columns(path):
    """Read a CSV written by :func:`write_columns`.

    Numeric columns come back as float arrays, anything else as lists of str.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(names):
        col = [r[j] for r in rows]
        try:
            out[name] = np.array([float(v) for v in col])
        except ValueError:
            out[name] = col
    return out


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FMT % float(value)
