"""Two-step sparse estimation of spatially structured vector autoregressions.

The package simulates stable VAR(L) processes whose components carry
positions in space, estimates their sparse transition matrices by
penalized least squares with and without a distance restriction,
estimates the dependence radius from a sampled subgraph, and benchmarks
the resulting estimators on synthetic scenarios with known ground truth.
"""

from .errors import (
    ConvergenceError,
    SpaceVarError,
    StabilityError,
    ValidationError,
)
from .metrics import auroc, forecast_mse, fp_fn_fractions, rel_frobenius_error
from .preprocess import (
    DetrendResult,
    interpolate_missing,
    interpolate_panel,
    select_order_cv,
    spline_detrend,
)
from .regression import (
    GramSystem,
    LassoSolution,
    PredictorMask,
    build_gram,
    full_mask,
    kkt_residual,
    lambda_grid,
    lambda_max,
    lasso_cd,
    lasso_path,
)
from .scenario import (
    LayoutSpec,
    ScenarioTruth,
    SparsitySpec,
    gen_layout,
    gen_scenario,
    gen_transition,
    load_truth,
    quantile_radius,
    save_truth,
)
from .spatial import SpatialLayout, read_positions_csv, write_positions_csv
from .stability import (
    FrequencyMatrix,
    StabilityConfig,
    select,
    selection_frequencies,
)
from .two_step import (
    Edge,
    EdgeSet,
    FitResult,
    SamplingDesign,
    SelectionConfig,
    TwoStepConfig,
    build_distance_mask,
    estimate_radius,
    fit_full,
    sample_nodes,
    step1_estimate_edges,
    step2_fit,
    two_step,
)
from .var_model import (
    NoiseSpec,
    TimeSeriesPanel,
    TransitionStack,
    VarProcess,
    companion_spectral_radius,
    forecast,
    read_panel_csv,
    simulate,
    stationary_covariance,
    write_panel_csv,
)

__version__ = "0.1.0"

__all__ = [
    "auroc",
    "build_distance_mask",
    "build_gram",
    "companion_spectral_radius",
    "ConvergenceError",
    "DetrendResult",
    "Edge",
    "EdgeSet",
    "estimate_radius",
    "fit_full",
    "FitResult",
    "forecast",
    "forecast_mse",
    "fp_fn_fractions",
    "FrequencyMatrix",
    "full_mask",
    "gen_layout",
    "gen_scenario",
    "gen_transition",
    "GramSystem",
    "interpolate_missing",
    "interpolate_panel",
    "kkt_residual",
    "lambda_grid",
    "lambda_max",
    "lasso_cd",
    "lasso_path",
    "LassoSolution",
    "LayoutSpec",
    "load_truth",
    "NoiseSpec",
    "PredictorMask",
    "quantile_radius",
    "read_panel_csv",
    "read_positions_csv",
    "rel_frobenius_error",
    "sample_nodes",
    "SamplingDesign",
    "save_truth",
    "ScenarioTruth",
    "select",
    "select_order_cv",
    "selection_frequencies",
    "SelectionConfig",
    "simulate",
    "SpaceVarError",
    "SparsitySpec",
    "SpatialLayout",
    "spline_detrend",
    "StabilityConfig",
    "StabilityError",
    "stationary_covariance",
    "step1_estimate_edges",
    "step2_fit",
    "TimeSeriesPanel",
    "TransitionStack",
    "two_step",
    "TwoStepConfig",
    "ValidationError",
    "VarProcess",
    "write_panel_csv",
    "write_positions_csv",
]
