"""Adaptive multi-factor toolkit.

Selects tradeable basis assets per stock with a groupwise interpretable
selection pipeline (market orthogonalization, minimax-prototype
clustering, capped one-standard-error LASSO, OLS refit) and runs
rolling-window stability batteries with FDR-controlled reporting.
"""

from .calibrate import CalibrationReport, null_battery, power_ladder
from .cluster import (
    Dendrogram,
    PrototypeSet,
    correlation_distance,
    cut_prototypes,
    distance_matrix,
    minimax_cluster,
)
from .config import RunConfig, load_config
from .gibs import (
    OrthogonalizedPanel,
    SelectionResult,
    WindowData,
    ff5_baseline,
    fit_stock,
    groupwise_reduce,
    orthogonalize,
    prepare_window,
    refit_ols,
    select_factors,
)
from .grids import TestGrid, diff_grids, sweep
from .invariance import (
    HalfIndicator,
    intercept_test,
    linear_invariance_test,
    oos_evaluate,
    residual_analysis,
    spline_invariance_test,
)
from .lasso import (
    LassoPath,
    ModifiedLambdaChoice,
    choose_lambda,
    cv_path,
    lasso_solve,
)
from .panels import (
    FactorPanel,
    PricePanel,
    build_adjusted_prices,
    compound_mma,
    filter_assets,
    first_difference,
)
from .stats import (
    AnovaResult,
    FitSummary,
    adjusted_r2,
    bhy_adjust,
    nested_anova,
    ols_fit,
    out_of_sample_r2,
)
from .synth import GroundTruth, SynthSpec, generate, make_spec
from .taxonomy import Taxonomy, builtin_taxonomy, load_taxonomy
from .windows import Window, enumerate_windows, make_window

__version__ = "0.1.0"
