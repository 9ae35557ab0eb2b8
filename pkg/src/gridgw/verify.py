"""Self-check suite behind ``gridgw verify``.

Each check compares a fast code path with an independent oracle and
returns a :class:`CheckResult`. The suite is small enough to run in well
under a minute at the default sizes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from . import reference
from .core import DiscreteMeasure, SolverConfig, UniformGrid1D, UniformGrid2D
from .experiments.data import random_pair
from .fast_multiply import apply_distance, apply_lower, apply_upper, dense_distance_matrix
from .gradient import fgw_workspace, gw_gradient, gw_workspace, objective
from .solvers import compare_modes, entropic_gw, plan_discrepancy, sinkhorn


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name:<28} value={self.value:.3e}  "
                f"tol={self.tolerance:.0e}  ({self.seconds:.2f} s)")


def _relative_error(fast, exact) -> float:
    scale = max(np.max(np.abs(exact)), np.finfo(float).tiny)
    return float(np.max(np.abs(fast - exact)) / scale)


def check_multiply_oracle(ks: Sequence[int], ns: Sequence[int], sides: Sequence[int] = (8, 16),
                          trials: int = 5, seed: int = 0) -> float:
    """Largest relative error of fast 1D/2D multiplies against dense matrices."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in ks:
        for n in ns:
            grid = UniformGrid1D(n, 1.0 / max(n - 1, 1), k)
            d = dense_distance_matrix(grid)
            for _ in range(trials):
                x = rng.uniform(size=n)
                worst = max(worst, _relative_error(apply_distance(x, grid), d @ x))
        for side in sides:
            grid = UniformGrid2D(side, 1.0 / max(side - 1, 1), k)
            d = dense_distance_matrix(grid)
            for _ in range(trials):
                x = rng.uniform(size=grid.points)
                worst = max(worst, _relative_error(apply_distance(x, grid), d @ x))
    return worst


def check_reversal_identity(ks: Sequence[int], n: int = 257, seed: int = 1) -> float:
    """The upper sweep equals the reversed lower sweep; 0 means bit-exact."""
    x = np.random.default_rng(seed).uniform(size=n)
    return max(float(np.max(np.abs(apply_upper(x, k) - apply_lower(x[::-1], k)[::-1])))
               for k in ks)


def check_gradient_brute_force(k: int = 1, n: int = 8, seed: int = 2) -> float:
    rng = np.random.default_rng(seed)
    grid = UniformGrid1D(n, 1.0 / (n - 1), k)
    g = rng.uniform(size=(n, n))
    g /= g.sum()
    # the assembled gradient holds for plans in S(u, v); take u, v from the plan itself
    ws = gw_workspace(DiscreteMeasure(g.sum(axis=1), grid), DiscreteMeasure(g.sum(axis=0), grid))
    dx = dy = dense_distance_matrix(grid)
    return _relative_error(gw_gradient(g, ws), reference.gw_gradient(g, dx, dy))


def check_gradient_fd(n: int = 8, seed: int = 3, theta: float = 0.5) -> float:
    """Finite differences of the FGW objective against the assembled gradient."""
    rng = np.random.default_rng(seed)
    u, v = random_pair(n, seed)
    cost = np.abs(rng.normal(size=(n, n)))
    ws = fgw_workspace(u, v, cost, theta)
    plan = np.outer(u.weights, v.weights)
    fd = reference.central_differences(lambda p: objective(p, ws), plan)
    grad = gw_gradient(plan, ws)
    return float(np.max(np.abs(fd - grad) / np.maximum(np.abs(grad), 1e-12)))


def check_sinkhorn(seed: int = 4) -> float:
    """Closed-form 2x2 case plus the marginals of a random converged solve."""
    half = np.full(2, 0.5)
    plan = sinkhorn(np.array([[0.0, 1.0], [1.0, 0.0]]), half, half, 0.3).values
    err = float(np.max(np.abs(plan - reference.sinkhorn_2x2(0.3))))
    u, v = random_pair(50, seed)
    cost = np.abs(np.subtract.outer(np.arange(50.0), np.arange(50.0))) / 49
    _, state = sinkhorn(cost, u, v, 0.01, log=True)
    return max(err, state.violation if state.converged else np.inf)


def check_mode_equivalence(n: int = 60, seed: int = 5) -> float:
    u, v = random_pair(n, seed)
    return compare_modes(u, v, config=SolverConfig(epsilon=0.002))[2]


def check_reversal_equivariance(n: int = 60, seed: int = 6) -> float:
    u, v = random_pair(n, seed)
    rev = type(u)(u.weights[::-1], u.grid)
    cfg = SolverConfig(epsilon=0.002)
    return plan_discrepancy(entropic_gw(rev, v, cfg).plan.values,
                            entropic_gw(u, v, cfg).plan.values[::-1])


def run_checks(ks: Sequence[int] = (1, 2, 3), ns: Sequence[int] = (16, 64, 256),
               solver_n: int = 60) -> List[CheckResult]:
    """Run every check; the order is fixed."""
    plan: List[tuple] = [
        ("multiply-oracle", lambda: check_multiply_oracle(ks, ns), 1e-12),
        ("reversal-identity", lambda: check_reversal_identity(ks), 0.0),
        ("gradient-brute-force", check_gradient_brute_force, 1e-11),
        ("gradient-finite-differences", check_gradient_fd, 1e-5),
        ("sinkhorn-marginals", check_sinkhorn, 1e-9),
        ("mode-equivalence", lambda: check_mode_equivalence(solver_n), 1e-12),
        ("reversal-equivariance", lambda: check_reversal_equivariance(solver_n), 1e-10),
    ]
    results = []
    for name, func, tol in plan:
        t0 = time.perf_counter()
        value = float(func())
        passed = bool(np.isfinite(value) and value <= tol)
        results.append(CheckResult(name, passed, value, tol, time.perf_counter() - t0))
    return results
