"""Domain data model: grids, measures, plans, feature costs and solver settings.

All containers are immutable after construction. Arrays stored on them are
flagged read-only so they can be shared between threads without copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import xlogy

from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    NegativeEntry,
    NegativeWeight,
    NonFiniteCost,
    NotNormalized,
    ThetaOutOfRange,
    WrongLength,
)

#: Inputs whose total mass deviates from one by more than this are rejected.
NORMALIZATION_BAND = 1e-9
# below this deviation the weights are left untouched (keeps validation idempotent)
_RENORM_FLOOR = 1e-14


def _frozen(a, ndim=None) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UniformGrid1D:
    """Uniform 1D grid; the implied distance between points i and j is
    ``(spacing * |i - j|) ** power``."""

    size: int
    spacing: float = 1.0
    power: int = 1

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ConfigInvalid(f"grid size must be a positive integer, got {self.size!r}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ConfigInvalid(f"grid spacing must be positive, got {self.spacing!r}")
        if int(self.power) != self.power or self.power < 1:
            raise ConfigInvalid(f"distance power must be a positive integer, got {self.power!r}")
        object.__setattr__(self, "size", int(self.size))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "power", int(self.power))

    @property
    def points(self) -> int:
        return self.size

    @property
    def shape(self) -> tuple:
        return (self.size,)


@dataclass(frozen=True)
class UniformGrid2D:
    """Square ``side x side`` grid with equal spacing on both axes.

    Points are flattened column-major (the row index varies fastest). The
    implied distance is the ``power``-th power of the scaled Manhattan
    distance.
    """

    side: int
    spacing: float = 1.0
    power: int = 1

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 1:
            raise ConfigInvalid(f"grid side must be a positive integer, got {self.side!r}")
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ConfigInvalid(f"grid spacing must be positive, got {self.spacing!r}")
        if int(self.power) != self.power or self.power < 1:
            raise ConfigInvalid(f"distance power must be a positive integer, got {self.power!r}")
        object.__setattr__(self, "side", int(self.side))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "power", int(self.power))

    @property
    def points(self) -> int:
        return self.side * self.side

    @property
    def shape(self) -> tuple:
        return (self.side, self.side)

    def vec(self, image) -> np.ndarray:
        """Flatten a ``side x side`` array in column-major order."""
        image = np.asarray(image, dtype=np.float64)
        if image.shape != self.shape:
            raise DimensionMismatch(f"expected shape {self.shape}, got {image.shape}")
        return image.reshape(-1, order="F")

    def mat(self, x) -> np.ndarray:
        """Inverse of :meth:`vec`."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.points,):
            raise DimensionMismatch(f"expected length {self.points}, got shape {x.shape}")
        return x.reshape(self.shape, order="F")


Grid = Union[UniformGrid1D, UniformGrid2D]


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Nonnegative weights attached to the points of a grid.

    Construction only stores the data; call :func:`validate_measure` to
    enforce the balanced-setting invariants.
    """

    weights: np.ndarray
    grid: Grid

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if isinstance(self.grid, UniformGrid2D) and w.shape == self.grid.shape:
            w = self.grid.vec(w)
        object.__setattr__(self, "weights", _frozen(w.ravel() if w.ndim == 0 else w, ndim=1))

    @classmethod
    def uniform(cls, grid: Grid) -> "DiscreteMeasure":
        return cls(np.full(grid.points, 1.0 / grid.points), grid)

    def __len__(self):
        return self.weights.shape[0]


@dataclass(frozen=True, eq=False)
class FeatureCost:
    """Dense ``M x N`` matrix of feature distances between source and target points."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, ndim=2)
        if not np.all(np.isfinite(values)):
            raise NonFiniteCost("feature cost contains non-finite entries")
        if np.any(values < 0):
            raise NegativeEntry("feature cost must be nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    def check(self, u: DiscreteMeasure, v: DiscreteMeasure) -> "FeatureCost":
        if self.shape != (len(u), len(v)):
            raise DimensionMismatch(
                f"feature cost has shape {self.shape}, measures need {(len(u), len(v))}"
            )
        return self


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling matrix together with the marginals it is meant to satisfy."""

    values: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, ndim=2)
        rows = _frozen(self.row_marginal, ndim=1)
        cols = _frozen(self.col_marginal, ndim=1)
        if values.shape != (rows.shape[0], cols.shape[0]):
            raise DimensionMismatch(
                f"plan shape {values.shape} does not match marginals "
                f"({rows.shape[0]}, {cols.shape[0]})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "row_marginal", rows)
        object.__setattr__(self, "col_marginal", cols)

    @property
    def shape(self):
        return self.values.shape

    def marginal_violation(self) -> float:
        """Largest absolute deviation of row or column sums from the targets."""
        return marginal_violation(self.values, self.row_marginal, self.col_marginal)

    @classmethod
    def independent(cls, u: DiscreteMeasure, v: DiscreteMeasure) -> "TransportPlan":
        return cls(np.outer(u.weights, v.weights), u.weights, v.weights)


def marginal_violation(values, rows, cols) -> float:
    values = np.asarray(values)
    return float(
        max(
            np.max(np.abs(values.sum(axis=1) - rows)),
            np.max(np.abs(values.sum(axis=0) - cols)),
        )
    )


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the mirror-descent solvers.

    ``tau=None`` means ``tau = epsilon``. ``gradient_mode`` selects the fast
    recursion (``"fast"``) or dense matrices (``"naive"``); ``naive_kernel``
    picks how the dense triple product is evaluated (``"loop"``: compiled
    inner products, ``"blas"``: numpy matmul).
    """

    epsilon: float = 0.002
    tau: Optional[float] = None
    theta: float = 0.5
    outer_iterations: int = 10
    sinkhorn_max_iterations: int = 10_000
    sinkhorn_tolerance: float = 1e-9
    log_domain: bool = True
    gradient_mode: str = "fast"
    naive_kernel: str = "loop"
    outer_tolerance: Optional[float] = None
    warm_start: bool = True

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigInvalid(f"epsilon must be positive, got {self.epsilon!r}")
        if self.tau is not None and not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigInvalid(f"tau must be positive, got {self.tau!r}")
        if not (0.0 <= self.theta <= 1.0):
            raise ThetaOutOfRange(f"theta must lie in [0, 1], got {self.theta!r}")
        if self.outer_iterations < 1 or self.sinkhorn_max_iterations < 1:
            raise ConfigInvalid("iteration budgets must be positive")
        if not self.sinkhorn_tolerance > 0:
            raise ConfigInvalid("sinkhorn_tolerance must be positive")
        if self.outer_tolerance is not None and not self.outer_tolerance > 0:
            raise ConfigInvalid("outer_tolerance must be positive")
        if self.gradient_mode not in ("fast", "naive"):
            raise ConfigInvalid(f"unknown gradient_mode {self.gradient_mode!r}")
        if self.naive_kernel not in ("loop", "blas"):
            raise ConfigInvalid(f"unknown naive_kernel {self.naive_kernel!r}")

    @property
    def penalty(self) -> float:
        return self.epsilon if self.tau is None else self.tau

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class SolveResult:
    plan: TransportPlan
    gw_objective: float
    entropic_objective: float
    iterations_used: int
    marginal_violation: float
    converged: bool = True
    trace: Optional[object] = None
    timings: dict = field(default_factory=dict)


def validate_measure(m: DiscreteMeasure) -> DiscreteMeasure:
    """Check a measure for the balanced setting.

    Weights must be nonnegative, match the grid size and sum to one within
    :data:`NORMALIZATION_BAND`; small deviations are renormalized away.

    Raises
    ------
    WrongLength, NegativeWeight, NotNormalized
    """
    w = m.weights
    if w.shape[0] != m.grid.points:
        raise WrongLength(f"measure has {w.shape[0]} weights but the grid has {m.grid.points} points")
    if not np.all(np.isfinite(w)):
        raise NegativeWeight("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight {w.min()!r}")
    total = float(w.sum())
    if abs(total - 1.0) > NORMALIZATION_BAND:
        raise NotNormalized(f"weights sum to {total!r}")
    if abs(total - 1.0) <= _RENORM_FLOOR:
        return m
    return DiscreteMeasure(w / total, m.grid)


def entropy(plan) -> float:
    """Return ``sum(g * (log(g) - 1))`` over plan entries, with ``0 log 0 = 0``."""
    g = np.asarray(plan.values if isinstance(plan, TransportPlan) else plan, dtype=np.float64)
    if np.any(g < 0):
        raise NegativeEntry("plan has negative entries")
    return float(np.sum(xlogy(g, g) - g))
