"""Brute-force oracles, independent of the fast path.

Everything here works on explicit dense matrices with direct sums and is
meant for small problems only (the gradient is ``O(M**2 N**2)``).
"""

import numpy as np


def distortion_tensor(dx, dy):
    """``L[i, j, p, q] = (dx[i, j] - dy[p, q]) ** 2``."""
    return (dx[:, :, None, None] - dy[None, None, :, :]) ** 2


def gw_objective(plan, dx, dy):
    g = np.asarray(plan, dtype=np.float64)
    return float(np.einsum("ijpq,ip,jq->", distortion_tensor(dx, dy), g, g))


def gw_gradient(plan, dx, dy):
    g = np.asarray(plan, dtype=np.float64)
    return 2.0 * np.einsum("ijpq,jq->ip", distortion_tensor(dx, dy), g)


def fgw_objective(plan, dx, dy, cost, theta):
    g = np.asarray(plan, dtype=np.float64)
    return (1 - theta) * float(np.sum(cost ** 2 * g)) + theta * gw_objective(g, dx, dy)


def fgw_gradient(plan, dx, dy, cost, theta):
    return (1 - theta) * cost ** 2 + theta * gw_gradient(plan, dx, dy)


def central_differences(func, plan, delta=1e-6):
    """Entrywise central finite differences of a scalar function of a matrix."""
    g = np.array(plan, dtype=np.float64)
    out = np.empty_like(g)
    for idx in np.ndindex(g.shape):
        old = g[idx]
        g[idx] = old + delta
        hi = func(g)
        g[idx] = old - delta
        lo = func(g)
        g[idx] = old
        out[idx] = (hi - lo) / (2 * delta)
    return out


def sinkhorn_2x2(epsilon):
    """Entropic OT on cost [[0, 1], [1, 0]] with uniform marginals.

    Feasible plans are ``[[z, w], [w, z]]`` with ``z + w = 1/2``; minimizing
    ``2w + eps * H`` gives ``z / w = exp(1 / eps)``.
    """
    sigma = 1.0 / (1.0 + np.exp(-1.0 / epsilon))
    z, w = sigma / 2, (1 - sigma) / 2
    return np.array([[z, w], [w, z]])
