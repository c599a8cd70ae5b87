"""CSV output: UTF-8, header row, '.' decimals, 17 significant digits."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _fmt_column(col) -> list:
    col = np.asarray(col)
    if col.dtype.kind in "iub":
        return [str(int(v)) for v in col]
    return ["%.17g" % v for v in col.astype(float)]


def write_csv(path, header, columns) -> Path:
    """Write equal-length ``columns`` under ``header``; integers stay integers."""
    path = Path(path)
    if len(header) != len(columns):
        raise ValueError("header and columns differ in length")
    cols = [_fmt_column(c) for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(row) + "\n")
    return path


def read_csv(path):
    """Read a file written by :func:`write_csv` into ``(header, float array)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
