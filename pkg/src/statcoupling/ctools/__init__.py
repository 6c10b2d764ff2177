"""Generalized convexity on finite grids: costs, c-transforms, curvature."""

from .costs import (
    AveragedCost,
    CostSpec,
    HammingCost,
    LogCost,
    PowerCost,
    SquaredCost,
    TabulatedCost,
    make_cost,
    require_invertible,
)
from .curvature import (
    CombinationReport,
    StabilityReport,
    concave_combination_check,
    condition_ii_gap,
    convex_stability_check,
    cross_curvature,
    mean_potential_hessian,
    sigma_floor,
)
from .transforms import (
    CConcavity,
    SupergradientWarning,
    average_supergradient,
    c_supergradient_set,
    c_transform,
    c_transform_y,
    check_supergradient,
    first_order_residual,
    h_c,
    is_c_concave,
)

__all__ = [
    "AveragedCost", "CConcavity", "CombinationReport", "CostSpec", "HammingCost",
    "LogCost", "PowerCost", "SquaredCost", "StabilityReport", "SupergradientWarning",
    "TabulatedCost", "average_supergradient", "c_supergradient_set", "c_transform",
    "c_transform_y", "check_supergradient", "concave_combination_check",
    "condition_ii_gap", "convex_stability_check", "cross_curvature", "first_order_residual",
    "h_c", "is_c_concave", "make_cost", "mean_potential_hessian", "require_invertible",
    "sigma_floor",
]
