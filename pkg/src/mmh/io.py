"""Reading and writing point clouds.

Two text formats are supported: ``csv`` (header row, coordinate columns named
``x1..xD`` or ``x, y[, z]``) and ``xyz`` (whitespace-separated numbers, no
header). Exports render floats with 17 significant digits so coordinates
survive a round trip bit for bit.
"""

import csv
import math
import os
import tempfile

import numpy as np

from ._validation import check_cloud
from .errors import ManifoldTestError
from .idim import diagnostic_encodings

__all__ = ["load_cloud", "save_cloud", "export_labeled", "infer_format"]

ANALYSIS_COLUMNS = ("idim", "lex_code", "energy", "stratum")


def infer_format(path):
    return "csv" if str(path).lower().endswith(".csv") else "xyz"


def _parse_row(values, lineno, path):
    try:
        row = [float(v) for v in values]
    except ValueError as err:
        raise ManifoldTestError("parse-error", f"{path}:{lineno}: {err}", line=lineno) from None
    if not all(math.isfinite(v) for v in row):
        raise ManifoldTestError("parse-error", f"{path}:{lineno}: non-finite value", line=lineno)
    return row


def _coordinate_columns(header, path):
    names = [h.strip().lower() for h in header]
    numbered = []
    while f"x{len(numbered) + 1}" in names:
        numbered.append(names.index(f"x{len(numbered) + 1}"))
    if numbered:
        return numbered
    letters = [c for c in ("x", "y", "z") if c in names]
    if letters and letters == ["x", "y", "z"][: len(letters)]:
        return [names.index(c) for c in letters]
    raise ManifoldTestError("parse-error", f"{path}:1: no x1..xD or x,y,z columns in header", line=1)


def load_cloud(path, format=None):
    """Read a point cloud; rows with missing or non-finite values are errors."""
    fmt = format or infer_format(path)
    if fmt not in ("csv", "xyz"):
        raise ManifoldTestError("bad-format", f"unknown format {fmt!r}")
    if not os.path.exists(path):
        raise ManifoldTestError("missing-input", f"no such file: {path}")
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ManifoldTestError("parse-error", f"{path}: empty file", line=1)
            cols = _coordinate_columns(header, path)
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != len(header):
                    raise ManifoldTestError("ragged-rows", f"{path}:{lineno}", line=lineno)
                rows.append(_parse_row([rec[c] for c in cols], lineno, path))
        else:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if width is None:
                    width = len(parts)
                elif len(parts) != width:
                    raise ManifoldTestError("ragged-rows", f"{path}:{lineno}", line=lineno)
                rows.append(_parse_row(parts, lineno, path))
    if not rows:
        raise ManifoldTestError("empty-set", f"{path} contains no points")
    return np.asarray(rows, dtype=float)


def _fmt(v):
    return format(float(v), ".17g")


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_cloud(cloud, path, format=None):
    X = check_cloud(cloud)
    fmt = format or infer_format(path)
    if fmt == "csv":
        lines = [",".join(f"x{j + 1}" for j in range(X.shape[1]))]
        lines += [",".join(map(_fmt, row)) for row in X]
    elif fmt == "xyz":
        lines = [" ".join(map(_fmt, row)) for row in X]
    else:
        raise ManifoldTestError("bad-format", f"unknown format {fmt!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def export_labeled(cloud, records, strata, path):
    """Write ``x1..xD`` plus ``idim, lex_code, energy, stratum`` as csv.

    ``records=None`` writes coordinates only. Undefined points get -1 in
    ``idim``, ``lex_code`` and ``stratum``.
    """
    X = check_cloud(cloud)
    header = [f"x{j + 1}" for j in range(X.shape[1])]
    if records is None:
        lines = [",".join(header)] + [",".join(map(_fmt, row)) for row in X]
        _atomic_write(path, "\n".join(lines) + "\n")
        return
    if len(records) != len(X):
        raise ManifoldTestError("misaligned-records", f"{len(records)} records for {len(X)} points")
    n_scales = len(records[0].per_scale_dims) if records else 0
    lex, energy = diagnostic_encodings(records, range(n_scales))
    stratum = np.full(len(X), -1, dtype=np.int64)
    if strata is not None:
        for dim, rows in strata.groups.items():
            stratum[rows] = dim
    lines = [",".join(header + list(ANALYSIS_COLUMNS))]
    for row, r, lc, en, st in zip(X, records, lex, energy, stratum):
        idim = -1 if r.dimension is None else r.dimension
        lines.append(",".join([*map(_fmt, row), str(idim), str(int(lc)), _fmt(en), str(int(st))]))
    _atomic_write(path, "\n".join(lines) + "\n")
