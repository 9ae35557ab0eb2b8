"""Exact multiplication by power-distance matrices of uniform grids.

On a uniform 1D grid the distance matrix with entries ``|i - j|**k`` splits
into ``L + L.T`` where ``L`` is strictly lower triangular. ``y = L x`` is
produced by sweeping the grid once while carrying the ``k + 1`` partial power
sums

    a[r](i) = sum_{j < i} (i - j)**r * x[j],   r = 0..k,

advanced from one point to the next with the binomial identity

    a[r](i + 1) = x[i] + sum_{s <= r} C(r, s) * a[s](i),

so each output costs ``O(k**2)`` operations instead of ``O(N)``. ``L.T x`` is
the same sweep run backwards. On a square 2D grid the Manhattan power
distance expands binomially into Kronecker products of 1D factors, which are
applied one axis at a time.

The dense helpers at the bottom materialize the matrices; they are the
reference path used for testing and for the baseline timings.
"""

from __future__ import annotations

import contextlib
import functools
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import TransportPlan, UniformGrid1D, UniformGrid2D
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    EmptyInput,
    LengthMismatch,
    NotSquareGrid,
    TooLargeToMaterialize,
)

#: Largest point count :func:`dense_distance_matrix` builds without ``force``.
MATERIALIZE_LIMIT = 8192
#: Operator coefficients above this can no longer be represented exactly.
MAGNITUDE_WARNING = 1e15


class PrecisionWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class BinomialTable:
    """``entries[r, s] = C(r, s)`` for ``0 <= s <= r < max_order``.

    In the one-based notation of the recursion this is ``binom(r-1, s-1)``
    for ``1 <= s <= r <= max_order``.
    """

    max_order: int
    entries: np.ndarray

    @classmethod
    def build(cls, max_order: int) -> "BinomialTable":
        # exact integer Pascal triangle; conversion to float only rounds past order ~60
        rows = [[1]]
        for _ in range(1, max_order):
            prev = rows[-1]
            rows.append([1] + [prev[s - 1] + prev[s] for s in range(1, len(prev))] + [1])
        entries = np.zeros((max_order, max_order))
        for r, row in enumerate(rows):
            entries[r, : r + 1] = [float(c) for c in row]
        entries.setflags(write=False)
        return cls(max_order, entries)

    def __call__(self, r: int, s: int) -> float:
        return self.entries[r, s]

    def satisfies_pascal(self) -> bool:
        e = self.entries
        for r in range(self.max_order):
            if e[r, 0] != 1.0 or e[r, r] != 1.0:
                return False
            for s in range(1, r):
                if e[r, s] != e[r - 1, s - 1] + e[r - 1, s]:
                    return False
        return True


_TABLE_ORDER = 16
_fault = {"active": False}


@functools.lru_cache(maxsize=None)
def _clean_table(order: int) -> BinomialTable:
    return BinomialTable.build(order)


def binomial_table(power: int) -> BinomialTable:
    """Table large enough for the recursion at ``power``."""
    table = _clean_table(max(_TABLE_ORDER, power + 1))
    if _fault["active"]:
        entries = table.entries.copy()
        entries[2:, 1] += 1.0  # C(r, 1) is r; corrupt it everywhere it is used
        entries.setflags(write=False)
        return BinomialTable(table.max_order, entries)
    return table


@contextlib.contextmanager
def corrupted_binomials():
    """Test hook: every kernel call inside the block uses a wrong C(r, 1)."""
    _fault["active"] = True
    try:
        yield
    finally:
        _fault["active"] = False


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _power_sums(x, out, power, binom, reverse, accumulate):
    # x, out: (B, L, W); runs the recursion along axis 1, vectorized over W
    B, L, W = x.shape
    acc = np.zeros((power + 1, W))
    for b in range(B):
        acc[:, :] = 0.0
        for step in range(L):
            i = L - 1 - step if reverse else step
            if accumulate:
                for w in range(W):
                    out[b, i, w] += acc[power, w]
            else:
                for w in range(W):
                    out[b, i, w] = acc[power, w]
            if step == L - 1:
                break
            # descending r keeps a[0..r] at their old values while a[r] is rewritten
            for r in range(power, -1, -1):
                for w in range(W):
                    t = x[b, i, w] + acc[0, w]
                    for s in range(1, r + 1):
                        t += binom[r, s] * acc[s, w]
                    acc[r, w] = t


@njit(cache=True)
def _dense_triple_loop(dx, g, dyt):
    # (dx @ g @ dy) by contiguous inner products, dyt = dy.T
    m, n = g.shape
    t1 = np.empty((m, n))
    for i in range(m):
        for q in range(n):
            s = 0.0
            for p in range(n):
                s += g[i, p] * dyt[q, p]
            t1[i, q] = s
    t1t = np.ascontiguousarray(t1.T)
    out = np.empty((m, n))
    for i in range(m):
        for q in range(n):
            s = 0.0
            for j in range(m):
                s += dx[i, j] * t1t[q, j]
            out[i, q] = s
    return out


def _as_lines(x, power):
    if power < 1:
        raise ValueError(f"power must be >= 1, got {power}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DimensionMismatch(f"expected a vector or a matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInput("cannot apply the recursion to an empty sequence")
    return np.ascontiguousarray(x.reshape(1, x.shape[0], -1))


def apply_lower(x, k: int) -> np.ndarray:
    """Return ``y[i] = sum_{j < i} (i - j)**k * x[j]``.

    ``x`` may be a vector or a matrix; matrices are processed column by
    column (along axis 0).
    """
    x = np.asarray(x, dtype=np.float64)
    lines = _as_lines(x, k)
    out = np.empty_like(lines)
    _power_sums(lines, out, k, binomial_table(k).entries, False, False)
    return out.reshape(x.shape)


def apply_upper(x, k: int) -> np.ndarray:
    """Return ``y[i] = sum_{j > i} (j - i)**k * x[j]``.

    Runs the same sweep as :func:`apply_lower` from the far end, so it is
    bit-identical to ``apply_lower(x[::-1], k)[::-1]``.
    """
    x = np.asarray(x, dtype=np.float64)
    lines = _as_lines(x, k)
    out = np.empty_like(lines)
    _power_sums(lines, out, k, binomial_table(k).entries, True, False)
    return out.reshape(x.shape)


def count_lower_operations(x, k: int):
    """Instrumented pure-Python twin of :func:`apply_lower`.

    Performs the same floating-point operations in the same order and
    returns ``(y, counts)`` where ``counts`` has keys ``"mult"`` and
    ``"add"``. Meant for checking the operation count, not for speed.
    """
    x = [float(v) for v in np.asarray(x, dtype=np.float64).ravel()]
    if not x:
        raise EmptyInput("cannot apply the recursion to an empty sequence")
    binom = binomial_table(k).entries
    acc = [0.0] * (k + 1)
    y = []
    mult = add = 0
    for i, xi in enumerate(x):
        y.append(acc[k])
        if i == len(x) - 1:
            break
        for r in range(k, -1, -1):
            t = xi + acc[0]
            add += 1
            for s in range(1, r + 1):
                t += binom[r, s] * acc[s]
                mult += 1
                add += 1
            acc[r] = t
    return np.array(y), {"mult": mult, "add": add}


def _line_operator(x3, power):
    """Unscaled ``|i - j|**power`` operator along axis 1 of a (B, L, W) array."""
    if power == 0:
        # 0**0 = 1 on the diagonal too: all-ones matrix
        return np.broadcast_to(x3.sum(axis=1, keepdims=True), x3.shape).copy()
    binom = binomial_table(power).entries
    B, L, W = x3.shape
    if W == 1 and B > 1:
        # many short-width lines: lay them side by side so the sweep vectorizes
        # across lines; each line still sees the same operations in the same order
        xt = np.ascontiguousarray(x3.reshape(B, L).T).reshape(1, L, B)
        out = np.empty_like(xt)
        _power_sums(xt, out, power, binom, False, False)
        _power_sums(xt, out, power, binom, True, True)
        return np.ascontiguousarray(out.reshape(L, B).T).reshape(B, L, 1)
    out = np.empty_like(x3)
    _power_sums(x3, out, power, binom, False, False)
    _power_sums(x3, out, power, binom, True, True)
    return out


def _grid_operator(x, grid, axis, power):
    """Apply the unscaled distance operator of ``grid`` along ``axis`` of a matrix."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    pre = x.shape[0] if axis == 1 else 1
    post = x.shape[1] if axis == 0 else 1
    if isinstance(grid, UniformGrid1D):
        return _line_operator(x.reshape(pre, grid.size, post), power).reshape(x.shape)
    n = grid.side
    binom = binomial_table(power).entries
    out = np.zeros(x.size)
    # (|a - a'| + |b - b'|)**p = sum_r C(p, r) |b - b'|**r |a - a'|**(p - r)
    for r in range(power + 1):
        along_b = _line_operator(x.reshape(pre, n, n * post), r)
        along_a = _line_operator(along_b.reshape(pre * n, n, post), power - r)
        out += binom[power, r] * along_a.ravel()
    return out.reshape(x.shape)


def _reach(grid) -> int:
    return grid.size - 1 if isinstance(grid, UniformGrid1D) else 2 * (grid.side - 1)


def magnitude_bound(grid, power=None) -> float:
    """Largest entry ``(h * max index distance)**p`` of the distance matrix."""
    p = grid.power if power is None else power
    return (grid.spacing * _reach(grid)) ** p


def _check_magnitude(grid, power):
    # the sweep works on unscaled integer distances; past 1e15 they stop being exact
    p = grid.power if power is None else power
    worst = max(float(_reach(grid)) ** p, magnitude_bound(grid, p))
    if worst > MAGNITUDE_WARNING:
        warnings.warn(
            f"distance coefficients reach {worst:.3g}; accumulated sums may lose precision",
            PrecisionWarning,
            stacklevel=3,
        )


def apply_distance_1d(x, grid: UniformGrid1D, power=None) -> np.ndarray:
    """Multiply ``x`` by the grid distance matrix ``h**p * |i - j|**p``.

    ``power`` overrides ``grid.power`` (the squared-distance matrix of a
    grid with power ``k`` is the power ``2k`` operator).
    """
    if not isinstance(grid, UniformGrid1D):
        raise DimensionMismatch("apply_distance_1d needs a UniformGrid1D")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != grid.size:
        raise LengthMismatch(f"vector of shape {x.shape} does not fit a grid of {grid.size} points")
    p = grid.power if power is None else int(power)
    _check_magnitude(grid, p)
    y = _grid_operator(x.reshape(-1, 1), grid, 0, p).ravel()
    return grid.spacing ** p * y


def apply_distance_2d(x, grid: UniformGrid2D, power=None) -> np.ndarray:
    """Multiply a column-major flattened ``n x n`` field by the Manhattan power-distance matrix."""
    if not isinstance(grid, UniformGrid2D):
        raise NotSquareGrid("apply_distance_2d needs a square UniformGrid2D")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != grid.points:
        raise LengthMismatch(f"vector of shape {x.shape} does not fit a {grid.side}x{grid.side} grid")
    p = grid.power if power is None else int(power)
    _check_magnitude(grid, p)
    y = _grid_operator(x.reshape(-1, 1), grid, 0, p).ravel()
    return grid.spacing ** p * y


def apply_distance(x, grid, power=None) -> np.ndarray:
    if isinstance(grid, UniformGrid2D):
        return apply_distance_2d(x, grid, power)
    return apply_distance_1d(x, grid, power)


def _plan_matrix(plan):
    return np.asarray(plan.values if isinstance(plan, TransportPlan) else plan, dtype=np.float64)


def triple_product(plan, gx, gy) -> np.ndarray:
    """Return ``D_X @ plan @ D_Y`` without forming either distance matrix.

    Works for any combination of 1D and 2D grids: rows of the plan are
    multiplied by ``D_Y`` (symmetric) and the columns of the result by
    ``D_X``. Cost is ``O(k**2 M N)`` in 1D and ``O(k**3 M N)`` in 2D.
    """
    g = _plan_matrix(plan)
    if g.shape != (gx.points, gy.points):
        raise DimensionMismatch(f"plan shape {g.shape} does not match grids ({gx.points}, {gy.points})")
    _check_magnitude(gx, None)
    _check_magnitude(gy, None)
    z = _grid_operator(g, gy, 1, gy.power)
    z = _grid_operator(z, gx, 0, gx.power)
    z *= gx.spacing ** gx.power * gy.spacing ** gy.power
    return z


def triple_product_1d(plan, gx: UniformGrid1D, gy: UniformGrid1D) -> np.ndarray:
    if not (isinstance(gx, UniformGrid1D) and isinstance(gy, UniformGrid1D)):
        raise DimensionMismatch("triple_product_1d needs two 1D grids")
    return triple_product(plan, gx, gy)


def triple_product_2d(plan, gx: UniformGrid2D, gy: UniformGrid2D) -> np.ndarray:
    if not (isinstance(gx, UniformGrid2D) and isinstance(gy, UniformGrid2D)):
        raise NotSquareGrid("triple_product_2d needs two square 2D grids")
    return triple_product(plan, gx, gy)


# ---------------------------------------------------------------------------
# dense reference path
# ---------------------------------------------------------------------------


def dense_distance_matrix(grid, power=None, force: bool = False) -> np.ndarray:
    """Materialize the grid distance matrix entry by entry."""
    if grid.points > MATERIALIZE_LIMIT and not force:
        raise TooLargeToMaterialize(
            f"{grid.points} points exceed the limit of {MATERIALIZE_LIMIT}; pass force=True"
        )
    p = grid.power if power is None else int(power)
    if isinstance(grid, UniformGrid1D):
        idx = np.arange(grid.size, dtype=np.float64)
        steps = np.abs(idx[:, None] - idx[None, :])
    else:
        n = grid.side
        flat = np.arange(grid.points)
        a, b = flat % n, flat // n  # column-major: row index varies fastest
        steps = (np.abs(a[:, None] - a[None, :]) + np.abs(b[:, None] - b[None, :])).astype(np.float64)
    return (grid.spacing * steps) ** p


def dense_triple_product(dx, plan, dy, kernel: str = "loop") -> np.ndarray:
    """``dx @ plan @ dy`` with materialized matrices.

    ``kernel="loop"`` uses compiled contiguous inner products (one
    multiply-add at a time, like a textbook implementation);
    ``kernel="blas"`` hands the products to numpy.
    """
    g = np.ascontiguousarray(_plan_matrix(plan))
    if dx.shape != (g.shape[0],) * 2 or dy.shape != (g.shape[1],) * 2:
        raise DimensionMismatch("distance matrices do not match the plan")
    if kernel == "blas":
        return dx @ g @ dy
    if kernel == "loop":
        return _dense_triple_loop(np.ascontiguousarray(dx), g, np.ascontiguousarray(dy.T))
    raise ConfigInvalid(f"unknown kernel {kernel!r}")


def naive_triple_product(plan, gx, gy, kernel: str = "loop", force: bool = False) -> np.ndarray:
    """``O(N**3)`` baseline: build both distance matrices and multiply."""
    g = _plan_matrix(plan)
    if g.shape != (gx.points, gy.points):
        raise DimensionMismatch(f"plan shape {g.shape} does not match grids ({gx.points}, {gy.points})")
    dx = dense_distance_matrix(gx, force=force)
    dy = dense_distance_matrix(gy, force=force)
    return dense_triple_product(dx, g, dy, kernel)
