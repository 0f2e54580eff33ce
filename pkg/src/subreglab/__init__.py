"""subreglab: desk-scale estimation of higher-order metric subregularity.

Interval-union set values, a catalog of set-valued maps with hand-derived
piecewise formulas, sup-ratio modulus estimators, growth and perturbation
checkers, and a quasi-Newton solver for generalized equations with
empirical convergence-order analysis.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .errors import (
    AnalysisError,
    ApplicabilityError,
    CapabilityError,
    DomainError,
    EmptySetError,
    SpecError,
    SubproblemFailure,
    SubregLabError,
)
from .geneq import (
    GeneralizedEquation,
    IterationTrace,
    OperatorSchedule,
    RateReport,
    SolveConfig,
    equation_catalog,
    example_5_2_operator,
    rate_analysis,
    schedule_catalog,
    solve,
    subproblem_solve,
)
from .intervals import (
    ClosedInterval,
    IntervalUnion,
    distance,
    nearest_point,
    normalize,
)
from .maps import (
    CatalogEntry,
    SetValuedMap,
    SmoothMap,
    catalog,
    catalog_ids,
    get_entry,
    validate_graph_consistency,
    validate_smooth_map,
)
from .regularity import (
    GridSpec,
    GrowthCheckResult,
    MRProbeReport,
    OrderScanReport,
    PairwiseCheckResult,
    ParameterizedReport,
    PerturbationReport,
    RegularityEstimate,
    estimate_strong_subreg_modulus,
    estimate_subreg_modulus,
    growth_check_lower,
    growth_check_pairwise,
    metric_regularity_probe,
    order_scan,
    parameterized_check,
    perturbation_bound_check,
    perturbation_radius,
    ratio_at,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "ApplicabilityError",
    "CapabilityError",
    "CatalogEntry",
    "ClosedInterval",
    "DomainError",
    "EmptySetError",
    "GeneralizedEquation",
    "GridSpec",
    "GrowthCheckResult",
    "IntervalUnion",
    "IterationTrace",
    "KERNEL_BACKEND",
    "MRProbeReport",
    "OperatorSchedule",
    "OrderScanReport",
    "PairwiseCheckResult",
    "ParameterizedReport",
    "PerturbationReport",
    "RateReport",
    "RegularityEstimate",
    "SetValuedMap",
    "SmoothMap",
    "SolveConfig",
    "SpecError",
    "SubproblemFailure",
    "SubregLabError",
    "catalog",
    "catalog_ids",
    "distance",
    "equation_catalog",
    "estimate_strong_subreg_modulus",
    "estimate_subreg_modulus",
    "example_5_2_operator",
    "get_entry",
    "growth_check_lower",
    "growth_check_pairwise",
    "metric_regularity_probe",
    "nearest_point",
    "normalize",
    "order_scan",
    "parameterized_check",
    "perturbation_bound_check",
    "perturbation_radius",
    "rate_analysis",
    "ratio_at",
    "schedule_catalog",
    "solve",
    "subproblem_solve",
    "validate_graph_consistency",
    "validate_smooth_map",
    "__version__",
]
