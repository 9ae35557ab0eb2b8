"""GW and FGW gradients and objectives.

For a coupling with marginals ``u`` and ``v`` the GW gradient decomposes as

    grad E(G) = C1 - 4 * D_X @ G @ D_Y,
    C1[i, p]  = 2 * ((D_X * D_X) @ u)[i] + 2 * ((D_Y * D_Y) @ v)[p],

and the fused variant as ``C2 - 4 * theta * D_X @ G @ D_Y`` with
``C2 = (1 - theta) * C * C + theta * C1``. The constant part is built once
per problem; only the triple product changes between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DiscreteMeasure, FeatureCost, Grid, TransportPlan
from .errors import DimensionMismatch, ThetaOutOfRange
from .fast_multiply import (
    apply_distance,
    dense_distance_matrix,
    dense_triple_product,
    triple_product,
)


@dataclass(eq=False)
class GradientWorkspace:
    """Per-problem data reused across iterations.

    ``constant_term`` is C1 (GW) or C2 (FGW) and ``theta_scale`` the factor
    in front of the triple product (4 or 4 * theta). In naive mode the dense
    distance matrices are materialized here once.
    """

    gx: Grid
    gy: Grid
    constant_term: np.ndarray
    theta_scale: float
    theta: float = 1.0
    feature_sq: Optional[np.ndarray] = None
    mode: str = "fast"
    naive_kernel: str = "loop"
    dx: Optional[np.ndarray] = None
    dy: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.constant_term.shape

    def triple(self, plan) -> np.ndarray:
        """``D_X @ plan @ D_Y`` using the workspace's mode."""
        g = _matrix(plan)
        if g.shape != self.shape:
            raise DimensionMismatch(f"plan shape {g.shape} does not match workspace {self.shape}")
        if self.mode == "naive":
            return dense_triple_product(self.dx, g, self.dy, self.naive_kernel)
        return triple_product(g, self.gx, self.gy)

    def squared_distance_sums(self, rows, cols):
        """``((D_X * D_X) @ rows, (D_Y * D_Y) @ cols)``."""
        if self.mode == "naive":
            return (self.dx * self.dx) @ rows, (self.dy * self.dy) @ cols
        return (
            apply_distance(rows, self.gx, 2 * self.gx.power),
            apply_distance(cols, self.gy, 2 * self.gy.power),
        )


def _matrix(plan) -> np.ndarray:
    return np.asarray(plan.values if isinstance(plan, TransportPlan) else plan, dtype=np.float64)


def _check_pair(u: DiscreteMeasure, v: DiscreteMeasure):
    if len(u) != u.grid.points or len(v) != v.grid.points:
        raise DimensionMismatch("measure length does not match its grid")


def constant_term_gw(u: DiscreteMeasure, v: DiscreteMeasure) -> np.ndarray:
    """C1 as an ``M x N`` matrix, via the power-``2k`` fast multiply."""
    _check_pair(u, v)
    a = apply_distance(u.weights, u.grid, 2 * u.grid.power)
    b = apply_distance(v.weights, v.grid, 2 * v.grid.power)
    return 2.0 * (a[:, None] + b[None, :])


def _dense_constant_term(u, v, dx, dy):
    a = (dx * dx) @ u.weights
    b = (dy * dy) @ v.weights
    return 2.0 * (a[:, None] + b[None, :])


def gw_workspace(u: DiscreteMeasure, v: DiscreteMeasure, mode: str = "fast",
                 naive_kernel: str = "loop") -> GradientWorkspace:
    _check_pair(u, v)
    if mode == "naive":
        dx, dy = dense_distance_matrix(u.grid), dense_distance_matrix(v.grid)
        c1 = _dense_constant_term(u, v, dx, dy)
        return GradientWorkspace(u.grid, v.grid, c1, 4.0, mode=mode,
                                 naive_kernel=naive_kernel, dx=dx, dy=dy)
    return GradientWorkspace(u.grid, v.grid, constant_term_gw(u, v), 4.0)


def fgw_workspace(u: DiscreteMeasure, v: DiscreteMeasure, cost: FeatureCost, theta: float,
                  mode: str = "fast", naive_kernel: str = "loop") -> GradientWorkspace:
    if not 0.0 <= theta <= 1.0:
        raise ThetaOutOfRange(f"theta must lie in [0, 1], got {theta!r}")
    if not isinstance(cost, FeatureCost):
        cost = FeatureCost(cost)
    cost.check(u, v)
    ws = gw_workspace(u, v, mode, naive_kernel)
    csq = cost.values * cost.values
    ws.constant_term = (1.0 - theta) * csq + theta * ws.constant_term
    ws.theta_scale = 4.0 * theta
    ws.theta = float(theta)
    ws.feature_sq = csq
    return ws


def gw_gradient(plan, ws: GradientWorkspace, triple: Optional[np.ndarray] = None) -> np.ndarray:
    """``C - scale * D_X @ plan @ D_Y``.

    Pass ``triple`` when the product for this plan is already known.
    """
    if triple is None:
        triple = ws.triple(plan)
    return ws.constant_term - ws.theta_scale * triple


def fgw_gradient(plan, ws: GradientWorkspace, triple: Optional[np.ndarray] = None) -> np.ndarray:
    if ws.feature_sq is None:
        raise DimensionMismatch("workspace was not built with a feature cost; use fgw_workspace")
    return gw_gradient(plan, ws, triple)


def gw_objective(plan, ws: GradientWorkspace, triple: Optional[np.ndarray] = None) -> float:
    """GW distortion ``sum (dX_ij - dY_pq)**2 G_ip G_jq``.

    Evaluated as ``<grad E(G), G> / 2`` with the constant part rebuilt from
    the plan's own row and column sums, so the value is exact for any
    nonnegative matrix, not only for feasible couplings.
    """
    g = _matrix(plan)
    if triple is None:
        triple = ws.triple(g)
    rows, cols = g.sum(axis=1), g.sum(axis=0)
    a, b = ws.squared_distance_sums(rows, cols)
    return float(a @ rows + b @ cols - 2.0 * np.sum(triple * g))


def fgw_objective(plan, ws: GradientWorkspace, triple: Optional[np.ndarray] = None) -> float:
    """``(1 - theta) * <C * C, G> + theta * E(G)``."""
    if ws.feature_sq is None:
        raise DimensionMismatch("workspace was not built with a feature cost; use fgw_workspace")
    g = _matrix(plan)
    linear = float(np.sum(ws.feature_sq * g))
    return (1.0 - ws.theta) * linear + ws.theta * gw_objective(g, ws, triple)


def objective(plan, ws: GradientWorkspace, triple: Optional[np.ndarray] = None) -> float:
    """GW or FGW objective depending on how the workspace was built."""
    if ws.feature_sq is None:
        return gw_objective(plan, ws, triple)
    return fgw_objective(plan, ws, triple)
