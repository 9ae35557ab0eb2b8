"""File formats used by the command-line front-end.

Floats are always written in Python's shortest round-trip form
(``repr``), so reading a file back reproduces the in-memory values exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Optional

import numpy as np

from .core import DiscreteMeasure, FeatureCost, TransportPlan
from .errors import FileNotFound, UnsupportedFormat, WrongLength

#: Plans with at most this many rows and columns are written densely by default.
DENSE_LIMIT = 1000
#: Entries at or below this are dropped from sparse plan files by default.
SPARSE_THRESHOLD = 1e-12


def _check_file(path):
    if not os.path.isfile(path):
        raise FileNotFound(f"no such file: {path}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _numeric_rows(path):
    """Rows of floats, skipping blank lines, ``#`` comments and one header."""
    _check_file(path)
    rows = []
    header_seen = False
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            cells = [c.strip() for c in row]
            if not cells or not any(cells) or cells[0].startswith("#"):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if rows or header_seen:
                    raise UnsupportedFormat(f"{path}:{lineno + 1}: non-numeric entry {row!r}")
                header_seen = True
    return rows


def read_weights(path) -> np.ndarray:
    """Measure CSV: one weight per line, or ``index,weight`` pairs (0-based)."""
    rows = _numeric_rows(path)
    if not rows:
        raise UnsupportedFormat(f"{path} holds no weights")
    width = {len(r) for r in rows}
    if width == {1}:
        return np.array([r[0] for r in rows])
    if width == {2}:
        idx = np.array([r[0] for r in rows])
        if np.any(idx != np.round(idx)) or np.any(idx < 0):
            raise UnsupportedFormat(f"{path}: indices must be non-negative integers")
        idx = idx.astype(np.int64)
        n = len(rows)
        if sorted(idx.tolist()) != list(range(n)):
            raise WrongLength(f"{path}: indices must cover 0..{n - 1} exactly once")
        w = np.empty(n)
        w[idx] = [r[1] for r in rows]
        return w
    raise UnsupportedFormat(f"{path}: expected 1 or 2 columns, got {sorted(width)}")


def write_weights(path, weights):
    with open(path, "w") as fh:
        for w in np.asarray(weights, dtype=np.float64):
            fh.write(_fmt(w) + "\n")


def read_matrix(path) -> np.ndarray:
    rows = _numeric_rows(path)
    if not rows or len({len(r) for r in rows}) != 1:
        raise UnsupportedFormat(f"{path} is not a rectangular numeric matrix")
    return np.array(rows)


def read_feature_cost(path) -> FeatureCost:
    return FeatureCost(read_matrix(path))


def write_matrix(path, values):
    with open(path, "w") as fh:
        for row in np.asarray(values, dtype=np.float64):
            fh.write(",".join(map(_fmt, row)) + "\n")


def default_plan_format(shape) -> str:
    return "dense" if max(shape) <= DENSE_LIMIT else "sparse"


def write_plan(path, plan, fmt: Optional[str] = None, threshold: float = SPARSE_THRESHOLD) -> str:
    """Write a plan as a dense CSV matrix or as ``i,p,gamma`` triplets.

    Sparse files start with a ``# shape: M N`` line and keep entries above
    ``threshold``. Returns the format used.
    """
    values = np.asarray(getattr(plan, "values", plan), dtype=np.float64)
    fmt = fmt or default_plan_format(values.shape)
    if fmt == "dense":
        write_matrix(path, values)
    elif fmt == "sparse":
        rows, cols = np.nonzero(values > threshold)
        with open(path, "w") as fh:
            fh.write(f"# shape: {values.shape[0]} {values.shape[1]}\n")
            fh.write("i,p,gamma\n")
            for i, p in zip(rows.tolist(), cols.tolist()):
                fh.write(f"{i},{p},{_fmt(values[i, p])}\n")
    else:
        raise UnsupportedFormat(f"unknown plan format {fmt!r}")
    return fmt


def read_plan(path, shape=None) -> np.ndarray:
    """Read either plan format; sparse files carry their shape."""
    _check_file(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# shape:"):
        m, n = (int(t) for t in first.split(":", 1)[1].split())
        out = np.zeros((m, n))
        for r in _numeric_rows(path):
            out[int(r[0]), int(r[1])] = r[2]
        return out
    values = read_matrix(path)
    if shape is not None and values.shape != tuple(shape):
        raise WrongLength(f"{path}: plan shape {values.shape}, expected {tuple(shape)}")
    return values


def plan_from_file(path, u: DiscreteMeasure, v: DiscreteMeasure) -> TransportPlan:
    return TransportPlan(read_plan(path, (len(u), len(v))), u.weights, v.weights)


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def write_json(path, payload: dict):
    text = json.dumps(jsonable(payload), indent=2)
    if path is None or path == "-":
        return text
    with open(path, "w") as fh:
        fh.write(text + "\n")
    return text


def read_json(path) -> dict:
    _check_file(path)
    with open(path) as fh:
        return json.load(fh)


def result_payload(result) -> dict:
    """The JSON fields of a :class:`~gridgw.core.SolveResult`."""
    out = {
        "gw_objective": result.gw_objective,
        "entropic_objective": result.entropic_objective,
        "iterations": result.iterations_used,
        "marginal_violation": result.marginal_violation,
        "converged": result.converged,
        "timings": dict(result.timings),
    }
    if result.trace is not None:
        out["objective_trace"] = list(result.trace.objectives)
        out["sinkhorn_iterations"] = [r.sinkhorn_iterations for r in result.trace.records]
    return out
