"""Sinkhorn for entropic OT and the mirror-descent loops for entropic GW / FGW.

Each mirror-descent step linearizes the objective at the current plan and
solves an entropic OT problem whose cost is the gradient, plus
``(eps - tau) * log(plan)`` when the proximal weight ``tau`` differs from
``eps``:

    G_next = argmin_{G in S(u, v)} <grad + (eps - tau) log G_cur, G> + tau H(G).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numba import njit

from .core import (
    DiscreteMeasure,
    FeatureCost,
    SolveResult,
    SolverConfig,
    TransportPlan,
    entropy,
    marginal_violation,
    validate_measure,
)
from .errors import ConfigInvalid, DimensionMismatch, NonFiniteCost, NumericalOverflow
from .gradient import GradientWorkspace, fgw_workspace, gw_workspace, objective

log = logging.getLogger(__name__)

# scalings outside [1/ABSORB, ABSORB] are folded into the log-potentials
_ABSORB = 1e8
# rows/columns whose largest kernel exponent leaves [-_RECENTRE, _RECENTRE] are recentred
_RECENTRE = 300.0
# floor applied before taking log(plan) in the tau != eps cost
_LOG_FLOOR = 1e-300


@dataclass(eq=False)
class SinkhornState:
    """Dual potentials of an entropic OT solve.

    The plan is ``exp(log_u[i] - cost[i, p] / epsilon + log_v[p])``.
    Entries for zero-mass points are ``-inf``.
    """

    log_u: np.ndarray
    log_v: np.ndarray
    cost: np.ndarray
    epsilon: float
    iterations: int = 0
    violation: float = np.inf
    converged: bool = False
    absorptions: int = 0


@njit(cache=True, fastmath={"reassoc", "contract"})
def _fused_sweep(kernel, a, sa, sb, sa_next, col):
    """One scaling sweep in a single pass over the kernel rows.

    Returns the row violation ``max |sa * (K sb) - a|`` of the current
    scalings and writes ``sa_next = a / (K sb)`` and ``col = K^T sa_next``.
    """
    m, n = kernel.shape
    col[:] = 0.0
    err = 0.0
    for i in range(m):
        row = kernel[i]
        s = 0.0
        for p in range(n):
            s += row[p] * sb[p]
        e = abs(sa[i] * s - a[i])
        if not e <= err:  # also propagates NaN
            err = e
        t = a[i] / s
        sa_next[i] = t
        for p in range(n):
            col[p] += t * row[p]
    return err


@njit(cache=True)
def _scaling_loop(kernel, a, b, sa, sb, it, max_iter, tol, bound):
    """Sweep until convergence, the sweep cap, or a scaling outside ``[1/bound, bound]``.

    ``sa`` and ``sb`` are updated in place. Returns ``(status, it)`` with
    status 0 for converged, 1 for the cap and 2 for an out-of-range scaling.
    """
    m, n = kernel.shape
    sa_next = np.empty(m)
    col = np.empty(n)
    first = it == 0
    lo = 1.0 / bound
    while True:
        err = _fused_sweep(kernel, a, sa, sb, sa_next, col)
        if first:
            # the column marginals are only exact after an update
            for p in range(n):
                s = 0.0
                for i in range(m):
                    s += kernel[i, p] * sa[i]
                e = abs(sb[p] * s - b[p])
                if not e <= err:
                    err = e
            first = False
        if err <= tol:
            return 0, it
        if it >= max_iter:
            return 1, it
        sa[:] = sa_next
        for p in range(n):
            sb[p] = b[p] / col[p]
        it += 1
        for x in sa:
            if not (x > 0.0 and lo <= x <= bound):
                return 2, it
        for x in sb:
            if not (x > 0.0 and lo <= x <= bound):
                return 2, it


def _weights(m):
    if isinstance(m, DiscreteMeasure):
        return m.weights
    return np.asarray(m, dtype=np.float64)


def _solve_support(cost, a, b, eps, max_iter, tol, log_domain, f, g):
    """Scaling iterations on a problem with strictly positive marginals.

    ``f`` and ``g`` are potentials in cost units (modified in place). Returns
    ``(plan, iterations, converged, absorptions)``.
    """
    if log_domain:
        z = (f[:, None] + g[None, :] - cost) / eps
        low = z.max(axis=1)
        rows = np.abs(low) > _RECENTRE
        f[rows] -= eps * low[rows]
        z[rows] -= low[rows, None]
        low = z.max(axis=0)
        cols = np.abs(low) > _RECENTRE
        g[cols] -= eps * low[cols]
        z[:, cols] -= low[None, cols]
        kernel = np.exp(z)
        del z
    else:
        kernel = np.exp(-cost / eps)
    kernel = np.ascontiguousarray(kernel)
    sa = np.ones_like(a)
    sb = np.ones_like(b)
    bound = _ABSORB if log_domain else np.inf
    absorptions = 0
    it = 0
    while True:
        status, it = _scaling_loop(kernel, a, b, sa, sb, it, max_iter, tol, bound)
        if status != 2:
            break
        if not log_domain:
            raise NumericalOverflow(
                f"scaling vectors left the floating-point range after {it} sweeps; "
                "enable log_domain"
            )
        f += eps * np.log(sa)
        g += eps * np.log(sb)
        kernel = np.exp((f[:, None] + g[None, :] - cost) / eps)
        sa[:] = 1.0
        sb[:] = 1.0
        absorptions += 1
    converged = status == 0
    plan = sa[:, None] * kernel * sb[None, :]
    if log_domain:
        f += eps * np.log(sa)
        g += eps * np.log(sb)
    else:
        f[:] = eps * np.log(sa)
        g[:] = eps * np.log(sb)
    return plan, it, converged, absorptions


def sinkhorn(cost, u, v, epsilon: float, max_iter: int = 10_000, tol: float = 1e-9,
             log_domain: bool = True, init: Optional[SinkhornState] = None, log: bool = False):
    """Entropic optimal transport ``argmin <cost, G> + epsilon * H(G)`` over S(u, v).

    Parameters
    ----------
    cost : array-like, shape (M, N)
        Finite cost matrix.
    u, v : DiscreteMeasure or array-like
        Marginals. Zero-mass points get zero rows/columns.
    epsilon : float
        Regularization strength (> 0).
    max_iter : int
        Sweep budget. Running out is reported, not raised.
    tol : float
        Stop once the largest row or column marginal violation is at most this.
    log_domain : bool
        Absorb large scalings into log-potentials. Without it the plain
        Gibbs kernel ``exp(-cost / epsilon)`` is used and may overflow.
    init : SinkhornState, optional
        Warm start from earlier potentials.
    log : bool
        Also return the final :class:`SinkhornState`.

    Returns
    -------
    plan : TransportPlan
    state : SinkhornState, only if ``log=True``
    """
    cost = np.asarray(cost, dtype=np.float64)
    a, b = _weights(u), _weights(v)
    if cost.shape != (a.shape[0], b.shape[0]):
        raise DimensionMismatch(f"cost shape {cost.shape} does not match marginals")
    if not np.all(np.isfinite(cost)):
        raise NonFiniteCost("cost matrix has non-finite entries")
    if not epsilon > 0:
        raise ConfigInvalid(f"epsilon must be positive, got {epsilon!r}")

    rows, cols = a > 0, b > 0
    f = np.zeros(a.shape[0])
    g = np.zeros(b.shape[0])
    if init is not None:
        f[:] = np.where(np.isfinite(init.log_u), init.log_u, 0.0) * init.epsilon
        g[:] = np.where(np.isfinite(init.log_v), init.log_v, 0.0) * init.epsilon
    sub_f, sub_g = f[rows], g[cols]
    sub_plan, it, converged, absorptions = _solve_support(
        cost[np.ix_(rows, cols)], a[rows], b[cols], epsilon, max_iter, tol, log_domain,
        sub_f, sub_g,
    )
    values = np.zeros(cost.shape)
    values[np.ix_(rows, cols)] = sub_plan
    f[:] = -np.inf
    g[:] = -np.inf
    f[rows] = sub_f
    g[cols] = sub_g

    plan = TransportPlan(values, a, b)
    if not log:
        return plan
    state = SinkhornState(
        log_u=f / epsilon,
        log_v=g / epsilon,
        cost=cost,
        epsilon=epsilon,
        iterations=it,
        violation=marginal_violation(values, a, b),
        converged=converged,
        absorptions=absorptions,
    )
    return plan, state


@dataclass
class IterationRecord:
    objective: float
    entropic_objective: float
    marginal_violation: float
    sinkhorn_iterations: int
    gradient_seconds: float
    sinkhorn_seconds: float


@dataclass
class MirrorDescentTrace:
    records: List[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def objectives(self):
        return [r.objective for r in self.records]


def mirror_descent(u: DiscreteMeasure, v: DiscreteMeasure, ws: GradientWorkspace,
                   config: SolverConfig, setup_seconds: float = 0.0) -> SolveResult:
    """Run the outer loop for a prepared workspace (GW or FGW)."""
    eps, tau = config.epsilon, config.penalty
    t_start = time.perf_counter()
    plan = np.outer(u.weights, v.weights)
    triple = ws.triple(plan)
    trace = MirrorDescentTrace()
    state = None
    prev_obj = None
    grad_total = sink_total = 0.0
    violation = marginal_violation(plan, u.weights, v.weights)
    converged = True
    t_grad = time.perf_counter() - t_start
    for step in range(config.outer_iterations):
        t0 = time.perf_counter()
        cost = ws.constant_term - ws.theta_scale * triple
        if tau != eps:
            cost = cost + (eps - tau) * np.log(np.maximum(plan, _LOG_FLOOR))
        t1 = time.perf_counter()
        plan_obj, state = sinkhorn(
            cost, u, v, tau,
            max_iter=config.sinkhorn_max_iterations,
            tol=config.sinkhorn_tolerance,
            log_domain=config.log_domain,
            init=state if config.warm_start else None,
            log=True,
        )
        t2 = time.perf_counter()
        plan = plan_obj.values
        triple = ws.triple(plan)
        obj = objective(plan, ws, triple)
        t3 = time.perf_counter()

        violation = state.violation
        converged = state.converged
        if not converged:
            log.warning("sinkhorn stopped at %d sweeps with violation %.3g", state.iterations, violation)
        grad_s = (t1 - t0) + (t3 - t2) + t_grad
        t_grad = 0.0
        grad_total += grad_s
        sink_total += t2 - t1
        trace.records.append(IterationRecord(
            objective=obj,
            entropic_objective=obj + eps * entropy(plan),
            marginal_violation=violation,
            sinkhorn_iterations=state.iterations,
            gradient_seconds=grad_s,
            sinkhorn_seconds=t2 - t1,
        ))
        log.debug("step %d: objective %.12g, %d sweeps", step, obj, state.iterations)
        if config.outer_tolerance is not None and prev_obj is not None:
            if abs(obj - prev_obj) <= config.outer_tolerance:
                break
        prev_obj = obj

    last = trace.records[-1]
    return SolveResult(
        plan=TransportPlan(plan, u.weights, v.weights),
        gw_objective=last.objective,
        entropic_objective=last.entropic_objective,
        iterations_used=len(trace),
        marginal_violation=violation,
        converged=converged,
        trace=trace,
        timings={
            "setup_s": setup_seconds,
            "gradient_s": grad_total,
            "sinkhorn_s": sink_total,
            "solve_s": time.perf_counter() - t_start,
        },
    )


def _prepare(u, v):
    return validate_measure(u), validate_measure(v)


def entropic_gw(u: DiscreteMeasure, v: DiscreteMeasure,
                config: Optional[SolverConfig] = None) -> SolveResult:
    """Entropic Gromov-Wasserstein between two grid measures.

    Starts from the independent coupling ``u v^T`` and runs
    ``config.outer_iterations`` mirror-descent steps. The gradient uses the
    fast recursion unless ``config.gradient_mode == "naive"``.
    """
    config = config or SolverConfig()
    u, v = _prepare(u, v)
    t0 = time.perf_counter()
    ws = gw_workspace(u, v, config.gradient_mode, config.naive_kernel)
    return mirror_descent(u, v, ws, config, time.perf_counter() - t0)


def entropic_fgw(u: DiscreteMeasure, v: DiscreteMeasure, cost,
                 config: Optional[SolverConfig] = None) -> SolveResult:
    """Entropic fused GW with feature cost ``cost`` and weight ``config.theta``."""
    config = config or SolverConfig()
    u, v = _prepare(u, v)
    if not isinstance(cost, FeatureCost):
        cost = FeatureCost(cost)
    t0 = time.perf_counter()
    ws = fgw_workspace(u, v, cost, config.theta, config.gradient_mode, config.naive_kernel)
    return mirror_descent(u, v, ws, config, time.perf_counter() - t0)


def solve(u: DiscreteMeasure, v: DiscreteMeasure, cost=None,
          config: Optional[SolverConfig] = None) -> SolveResult:
    """GW when ``cost`` is None, FGW otherwise."""
    if cost is None:
        return entropic_gw(u, v, config)
    return entropic_fgw(u, v, cost, config)


def plan_discrepancy(a, b) -> float:
    """Frobenius norm ``||A - B||_F`` between two plans."""
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"plan shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def compare_modes(u: DiscreteMeasure, v: DiscreteMeasure, cost=None,
                  config: Optional[SolverConfig] = None):
    """Solve with the fast and the naive gradient and compare the plans.

    Returns ``(fast_result, naive_result, discrepancy)``.
    """
    config = config or SolverConfig()
    fast = solve(u, v, cost, config.with_(gradient_mode="fast"))
    naive = solve(u, v, cost, config.with_(gradient_mode="naive"))
    return fast, naive, plan_discrepancy(fast.plan, naive.plan)
