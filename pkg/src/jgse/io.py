"""Reading series and writing run artifacts (CSV, JSON, DOT)."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .model import DataError


def read_series_csv(path):
    """Read a numeric table with one column per node and one row per time step.

    A first row containing any non-numeric field is taken as the header.
    Returns ``(values, names)``.  Malformed rows raise ``DataError`` naming
    the 1-based line number.
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from None
    rows = []
    names = None
    width = None
    with handle:
        for lineno, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            fields = [f.strip() for f in row]
            if names is None and not rows and not all(_is_number(f) for f in fields):
                names = tuple(fields)
                width = len(fields)
                continue
            if width is None:
                width = len(fields)
            if len(fields) != width:
                raise DataError(f"{path}: line {lineno}: expected {width} fields, got {len(fields)}")
            values = []
            for f in fields:
                try:
                    v = float(f)
                except ValueError:
                    raise DataError(f"{path}: line {lineno}: non-numeric value {f!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: line {lineno}: non-finite value {f!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if names is None:
        names = tuple(f"x{i}" for i in range(width))
    return np.array(rows, dtype=float), names


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_matrix_csv(path, *, dtype=float) -> np.ndarray:
    """Square matrix written by ``write_matrix_csv`` (header row ignored)."""
    values, _ = read_series_csv(path)
    if values.shape[0] != values.shape[1]:
        raise DataError(f"{path}: expected a square matrix, got {values.shape}")
    return values.astype(dtype)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    # repr gives the shortest string that parses back to the same double
    return repr(float(v))


def write_matrix_csv(path, M, names=None) -> Path:
    """Write a 2-d array with a header of node names; floats round-trip exactly."""
    M = np.asarray(M)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = names if names is not None else [f"x{i}" for i in range(M.shape[1])]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in M:
            w.writerow([_fmt(v) for v in row])
    return path


def write_table_csv(path, rows: list, columns: list) -> Path:
    """Write a list of dicts as CSV with a fixed column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating, int, np.integer, bool, np.bool_)):
        return _fmt(v)
    return str(v)


def write_edges_csv(path, M, names, *, directed: bool,
                    columns=("source", "target", "weight")) -> Path:
    """Edge list of the nonzero off-diagonal entries, one row per edge.

    Undirected graphs list each pair once (upper triangle).
    """
    M = np.asarray(M, dtype=float)
    p = M.shape[0]
    src, dst, w = columns
    rows = [{src: names[i], dst: names[j], w: float(M[i, j])}
            for i in range(p) for j in range(p)
            if i != j and (directed or j > i) and M[i, j] != 0]
    return write_table_csv(path, rows, list(columns))


def write_labels_csv(path, labels, names) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "cluster"])
        for name, lab in zip(names, labels):
            w.writerow([name, int(lab)])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_dot(path, M, names, *, directed: bool, name: str = "G") -> Path:
    """Graphviz export of the nonzero off-diagonal entries of M.

    Directed graphs draw ``i -> j`` for ``M[i, j] != 0`` (for a transition
    matrix B this is the Granger edge ``x_i -> x_j``); undirected graphs use
    the upper triangle.  ``weight`` is the magnitude; negative entries are
    dashed, positive ones solid.
    """
    M = np.asarray(M, dtype=float)
    p = M.shape[0]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrow = "->" if directed else "--"
    lines = [f"{'digraph' if directed else 'graph'} {name} {{"]
    for i in range(p):
        lines.append(f'  "{names[i]}";')
    for i in range(p):
        for j in range(p):
            if i == j or (not directed and j < i) or M[i, j] == 0:
                continue
            w = float(M[i, j])
            style = "dashed" if w < 0 else "solid"
            lines.append(f'  "{names[i]}" {arrow} "{names[j]}" [weight={abs(w)!r}, style={style}];')
    lines.append("}")
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
