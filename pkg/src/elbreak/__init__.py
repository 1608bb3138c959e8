"""Empirical-likelihood change-point detection for autoregressive models.

The package tests for structural change in the coefficients of an AR(p)
series with a nonparametric empirical-likelihood ratio scanned over
candidate split points, calibrated through its extreme-value limit, with a
residual bootstrap for small samples, binary segmentation for multiple
changes, and a Monte Carlo harness for power studies.
"""

__version__ = "0.1.0"

from .errors import (
    BootstrapError,
    ConvexHullError,
    DegenerateSegment,
    ElbreakError,
    InputError,
    NonConvergence,
    NumericalError,
    ScanError,
)
from .estimating import (
    ARSpec,
    ChangeAlternative,
    GFrame,
    TimeSeries,
    as_series,
    fit_ar_ols,
    g_frame,
    lag_design,
    residuals,
)
from .el_solver import (
    DEFAULT_SEED,
    ELSolution,
    SolverSettings,
    h0_objective,
    h0_scores,
    neg2_log_lambda,
    segment_el,
    solve_lambda,
    z_h0,
    z_h1,
)
from .scan import (
    CalibrationConstants,
    ScanResult,
    bootstrap_pvalue,
    default_trim,
    gumbel_quantile,
    normalize,
    p_value_asymptotic,
    raw_threshold,
    trimmed_scan,
    u_of_n,
)
from .segmentation import SegmentationResult, SegmentNode, binary_segment
from .simulate import (
    CritvalStudy,
    NoiseModel,
    PowerStudyConfig,
    PowerTable,
    empirical_critval_study,
    gen_ar_change,
    parse_power_config,
    power_study,
    sample_noise,
)

__all__ = [
    "__version__",
    "ARSpec",
    "BootstrapError",
    "CalibrationConstants",
    "ChangeAlternative",
    "ConvexHullError",
    "CritvalStudy",
    "DEFAULT_SEED",
    "DegenerateSegment",
    "ELSolution",
    "ElbreakError",
    "GFrame",
    "InputError",
    "NoiseModel",
    "NonConvergence",
    "NumericalError",
    "PowerStudyConfig",
    "PowerTable",
    "ScanError",
    "ScanResult",
    "SegmentNode",
    "SegmentationResult",
    "SolverSettings",
    "TimeSeries",
    "as_series",
    "binary_segment",
    "bootstrap_pvalue",
    "default_trim",
    "empirical_critval_study",
    "fit_ar_ols",
    "g_frame",
    "gen_ar_change",
    "gumbel_quantile",
    "h0_objective",
    "h0_scores",
    "lag_design",
    "neg2_log_lambda",
    "normalize",
    "p_value_asymptotic",
    "parse_power_config",
    "power_study",
    "raw_threshold",
    "residuals",
    "sample_noise",
    "segment_el",
    "solve_lambda",
    "trimmed_scan",
    "u_of_n",
    "z_h0",
    "z_h1",
]
