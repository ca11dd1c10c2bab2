"""Experiment planning and parameter estimation for moisture transport.

A one-dimensional convection-diffusion model of vapour migration through a
porous slab, with tools to rank humidity-step boundary designs by Fisher
D-optimality, generate synthetic sensor records, and recover the transport
coefficients (d0, d1, a) by bound-constrained least squares.
"""

from .errors import (
    DegenerateSensitivityError,
    DomainError,
    EstimationError,
    InvariantViolation,
    SolverFailure,
)
from .harness import (
    SensorModel,
    catalog,
    first_order_lag,
    generate_synthetic_dataset,
    load_scenario,
    resolve_design_id,
)
from .inverse import (
    EstimationProblem,
    EstimationReport,
    ExperimentDataset,
    cost,
    default_bounds,
    estimate,
    estimate_h_from_mass_series,
    parameter_cdf,
    parameter_pdf,
    parameter_pdf_sigma,
    residual_diagnostics,
    total_measurement_uncertainty,
)
from .material import (
    MaterialModel,
    SorptionCurve,
    TransportCoefficients,
    saturation_pressure,
    wood_fibre,
)
from .oed import (
    DesignCatalog,
    FisherResult,
    MeasurementPlan,
    PriorSweepResult,
    fisher_matrix,
    prior_sweep,
    search_optimal_plan,
)
from .sensitivity import (
    PARAMETERS,
    SensitivityField,
    fd_sensitivity_oracle,
    parameter_scale,
    relative_l2_difference,
    solve_sensitivities,
)
from .solver import (
    DEFAULT_TOLERANCES,
    BoundaryDesign,
    FieldSolution,
    Grid1D,
    default_output_times,
    interp_space,
    sample_at,
    sg_face_flux,
    solve_forward,
)

__version__ = "1.0.0"

__all__ = [
    "BoundaryDesign",
    "DEFAULT_TOLERANCES",
    "DegenerateSensitivityError",
    "DesignCatalog",
    "DomainError",
    "EstimationError",
    "EstimationProblem",
    "EstimationReport",
    "ExperimentDataset",
    "FieldSolution",
    "FisherResult",
    "Grid1D",
    "InvariantViolation",
    "MaterialModel",
    "MeasurementPlan",
    "PARAMETERS",
    "PriorSweepResult",
    "SensitivityField",
    "SensorModel",
    "SolverFailure",
    "SorptionCurve",
    "TransportCoefficients",
    "catalog",
    "cost",
    "default_bounds",
    "default_output_times",
    "estimate",
    "estimate_h_from_mass_series",
    "fd_sensitivity_oracle",
    "first_order_lag",
    "fisher_matrix",
    "generate_synthetic_dataset",
    "interp_space",
    "load_scenario",
    "parameter_cdf",
    "parameter_pdf",
    "parameter_pdf_sigma",
    "parameter_scale",
    "prior_sweep",
    "relative_l2_difference",
    "residual_diagnostics",
    "resolve_design_id",
    "sample_at",
    "saturation_pressure",
    "search_optimal_plan",
    "sg_face_flux",
    "solve_forward",
    "solve_sensitivities",
    "total_measurement_uncertainty",
    "wood_fibre",
]
