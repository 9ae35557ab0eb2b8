"""Entropic Gromov-Wasserstein and fused GW on uniform 1D/2D grids.

The gradient's triple product ``D_X @ G @ D_Y`` is evaluated in ``O(MN)``
time per iteration by a binomial recursion over the grid instead of two
dense matrix products.
"""

from .core import (
    DiscreteMeasure,
    FeatureCost,
    SolveResult,
    SolverConfig,
    TransportPlan,
    UniformGrid1D,
    UniformGrid2D,
    entropy,
    marginal_violation,
    validate_measure,
)
from .errors import GridGWError
from .fast_multiply import (
    apply_distance,
    apply_lower,
    apply_upper,
    dense_distance_matrix,
    naive_triple_product,
    triple_product,
)
from .gradient import (
    fgw_gradient,
    fgw_objective,
    fgw_workspace,
    gw_gradient,
    gw_objective,
    gw_workspace,
)
from .solvers import (
    compare_modes,
    entropic_fgw,
    entropic_gw,
    mirror_descent,
    plan_discrepancy,
    sinkhorn,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure", "FeatureCost", "SolveResult", "SolverConfig", "TransportPlan",
    "UniformGrid1D", "UniformGrid2D", "entropy", "marginal_violation", "validate_measure",
    "GridGWError", "apply_distance", "apply_lower", "apply_upper", "dense_distance_matrix",
    "naive_triple_product", "triple_product", "fgw_gradient", "fgw_objective",
    "fgw_workspace", "gw_gradient", "gw_objective", "gw_workspace", "compare_modes",
    "entropic_fgw", "entropic_gw", "mirror_descent", "plan_discrepancy", "sinkhorn", "solve",
]
