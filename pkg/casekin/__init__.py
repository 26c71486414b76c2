from .errors import (
    CasekinError,
    DataError,
    ParseError,
    EmptyDataset,
    KaplanMeierError,
    EstimationError,
    DegenerateDependence,
    BandwidthError,
    SelectionFailed,
    CiFailed,
    SimulationError,
    PoolExhausted,
    NoRoot,
    BoundsCrossed
)
from .data import (
    Observation,
    FamilyRecord,
    Dataset,
    StepSurvival,
    Grid,
    validate_dataset
)
from .km import KmInput, km_estimate, km_relatives, km_naive, km_censoring
from .kernel import kernel_eval, kernel_moment, local_linear_fit
from .surfaces import (
    EstimatorConfig,
    TimeTransform,
    ConditionalSurfaces,
    build_time_transform,
    build_conditional_surfaces
)
from .marginal import (
    MarginalEstimate,
    psi_hat,
    hazard_hat,
    estimate_marginal,
    apply_km_bounds
)
from .bandwidth import (
    BandwidthConfig,
    CiConfig,
    bootstrap_dataset,
    imse_est,
    select_bandwidth,
    percentile_ci
)
from .frailty import (
    FrailtyModel,
    SimConfig,
    draw_frailty,
    simulate_dataset,
    calibrate_nu,
    oracle_surfaces
)
from .csvio import parse_csv, write_csv

__version__ = "0.1.1"


__all__ = [
    "__version__",
    "CasekinError",
    "DataError",
    "ParseError",
    "EmptyDataset",
    "KaplanMeierError",
    "EstimationError",
    "DegenerateDependence",
    "BandwidthError",
    "SelectionFailed",
    "CiFailed",
    "SimulationError",
    "PoolExhausted",
    "NoRoot",
    "BoundsCrossed",
    "Observation",
    "FamilyRecord",
    "Dataset",
    "StepSurvival",
    "Grid",
    "validate_dataset",
    "KmInput",
    "km_estimate",
    "km_relatives",
    "km_naive",
    "km_censoring",
    "kernel_eval",
    "kernel_moment",
    "local_linear_fit",
    "EstimatorConfig",
    "TimeTransform",
    "ConditionalSurfaces",
    "build_time_transform",
    "build_conditional_surfaces",
    "MarginalEstimate",
    "psi_hat",
    "hazard_hat",
    "estimate_marginal",
    "apply_km_bounds",
    "BandwidthConfig",
    "CiConfig",
    "bootstrap_dataset",
    "imse_est",
    "select_bandwidth",
    "percentile_ci",
    "FrailtyModel",
    "SimConfig",
    "draw_frailty",
    "simulate_dataset",
    "calibrate_nu",
    "oracle_surfaces",
    "parse_csv",
    "write_csv"
]
