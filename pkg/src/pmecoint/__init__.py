"""Pooled minimum eigenvalue estimation of long run relations in large panels.

Estimates how many stationary linear combinations an n-unit panel of m
nonstationary variables shares, and the coefficients of those combinations
with standard errors, from non-overlapping sub-sample time averages. Ships
with seeded Monte Carlo designs that reproduce the method's published
small-sample behaviour at desk scale.
"""

__version__ = "0.1.0"

from .dataio import (
    FilterSpec,
    RatioTrim,
    apply_filters,
    dumps_json,
    read_csv_long,
    records_to_panel,
    write_csv_long,
)
from .dgp import (
    PbDesign,
    SimulationTruth,
    VarDiffDesign,
    VecmDesign,
    build_loadings_r1,
    build_loadings_r2,
    dgp_pb,
    dgp_var_diff,
    dgp_vecm,
    ma_coefficients,
    solve_kappa_simulated,
    solve_kappa_var1,
)
from .eigen import EigenDecomposition, RankSelection, select_rank, symmetric_eigen
from .errors import (
    DegenerateVariableError,
    DesignError,
    IdentificationError,
    LengthError,
    NumericalError,
    PmeError,
    ValidationError,
)
from .experiments import CellReport, CoefficientSummary, ExperimentReport, run_experiment
from .longrun import (
    CovarianceComponents,
    estimate,
    estimate_covariance,
    exact_identify,
    pme_basis,
    t_statistics,
)
from .moments import (
    SubsampleMoments,
    SubsamplePlan,
    build_plan,
    correlation_from_covariance,
    partition,
    pooled_covariance,
    scale_by_diff_sd,
    subsample_deviations,
)
from .panel import (
    EstimationConfig,
    General,
    LongRunEstimate,
    Normalized,
    PanelDataset,
    UnitSeries,
    ValidationReport,
    validate,
)

__all__ = [
    "__version__",
    "CellReport",
    "CoefficientSummary",
    "CovarianceComponents",
    "DegenerateVariableError",
    "DesignError",
    "EigenDecomposition",
    "EstimationConfig",
    "ExperimentReport",
    "FilterSpec",
    "General",
    "IdentificationError",
    "LengthError",
    "LongRunEstimate",
    "Normalized",
    "NumericalError",
    "PanelDataset",
    "PbDesign",
    "PmeError",
    "RankSelection",
    "RatioTrim",
    "SimulationTruth",
    "SubsampleMoments",
    "SubsamplePlan",
    "UnitSeries",
    "ValidationError",
    "ValidationReport",
    "VarDiffDesign",
    "VecmDesign",
    "apply_filters",
    "build_loadings_r1",
    "build_loadings_r2",
    "build_plan",
    "correlation_from_covariance",
    "dgp_pb",
    "dgp_var_diff",
    "dgp_vecm",
    "dumps_json",
    "estimate",
    "estimate_covariance",
    "exact_identify",
    "ma_coefficients",
    "partition",
    "pme_basis",
    "pooled_covariance",
    "read_csv_long",
    "records_to_panel",
    "run_experiment",
    "scale_by_diff_sd",
    "select_rank",
    "solve_kappa_simulated",
    "solve_kappa_var1",
    "subsample_deviations",
    "symmetric_eigen",
    "t_statistics",
    "validate",
    "write_csv_long",
]
