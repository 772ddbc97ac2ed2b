"""Steady transport solves and Sobolev-Slobodetskii norms on 2D domains
with boundary tangency points.

The package solves  sigma + u * sigma_x1 = H  with data prescribed on the
inflow boundary, computes fractional norms of fields and boundary data,
fits the flatness exponent of the boundary at tangency points, and runs
the numerical experiments around the s = 1/r admissibility threshold.
"""

from .expr import EvalError, Expr, ParseError, differentiate, evaluate, parse
from .fields import (
    AssumptionError,
    ScalarField,
    VelocityField,
    certify_velocity,
    sample_field,
)
from .geometry import (
    BoundaryCurve,
    DomainSpec,
    GeometryError,
    SingularityPoint,
    build_domain,
    classify_boundary,
    detect_singularities,
    estimate_flatness,
    lens_domain,
    rectangle_domain,
    slice_interval,
    verify_analytic_lower_bound,
    vertical_cuts,
)
from .harness import (
    EstimateReport,
    SweepReport,
    decompose_increment,
    estimate_constant,
    fitted_flatness,
    random_family,
    sharpness_sweep,
    term_integrals,
    x1_direction_check,
)
from .norms import (
    FracParams,
    NormReport,
    QuadratureConfig,
    boundary_norm,
    full_seminorm,
    imbedding_check,
    lp_norm,
    norm_full,
    norm_star,
    seminorm_x1,
    seminorm_x2,
    sup_norm,
)
from .solver import (
    SolveResult,
    TestFunction,
    compute_potential,
    default_test_functions,
    reduce_rhs,
    solve,
    weak_residual,
)

__version__ = "0.1.0"
