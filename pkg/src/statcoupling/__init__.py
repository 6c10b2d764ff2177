"""Optimal stationary couplings of stationary processes.

Exact window-wise transport (rho-bar sequences), equivariant sliding block
codes built from convex or c-concave potentials, and grid tools for
generalized convexity.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CostDomainError,
    EnumerationTooLarge,
    InversionError,
    NotCConcaveError,
    NumericCheckFailed,
    SingularityError,
    ValidationError,
)
from .model import (  # noqa: E402
    Alphabet,
    Pushforward,
    Source,
    WindowDistribution,
    pushforward_window_marginal,
    sample_path,
    stationary_distribution,
    window_marginal,
)
from .transport import TransportPlan, independent_product_cost, solve_exact  # noqa: E402
from .rhobar import (  # noqa: E402
    FieldPushforward,
    FolnerBox,
    IIDField,
    RhoReport,
    folner_ratio,
    rho_field,
    rho_n,
    rho_sequence,
)
from .equivariant import (  # noqa: E402
    MeanBased,
    Quadratic,
    SlidingBlockCode,
    SumOfUnivariate,
    Tabulated,
    apply_code,
    ar_inverse_coefficients,
    build_c_code,
    build_code,
    coupling_cost_exact,
    coupling_cost_mc,
    field_code,
    subgradient,
)
from .glue import FiniteJoint, glue_finite  # noqa: E402

__all__ = [
    "Alphabet", "CostDomainError", "EnumerationTooLarge", "FieldPushforward",
    "FiniteJoint", "FolnerBox", "IIDField", "InversionError", "MeanBased",
    "NotCConcaveError", "NumericCheckFailed", "Pushforward", "Quadratic",
    "RhoReport", "SingularityError", "SlidingBlockCode", "Source",
    "SumOfUnivariate", "Tabulated", "TransportPlan", "ValidationError",
    "WindowDistribution", "apply_code", "ar_inverse_coefficients", "build_c_code",
    "build_code", "coupling_cost_exact", "coupling_cost_mc", "field_code",
    "folner_ratio", "glue_finite", "independent_product_cost",
    "pushforward_window_marginal", "rho_field", "rho_n", "rho_sequence",
    "sample_path", "solve_exact", "stationary_distribution", "subgradient",
    "window_marginal",
]
