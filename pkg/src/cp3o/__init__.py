"""Pruned dynamic-programming change point detection."""

from .divergence import (
    energy_divergence,
    energy_incomplete,
    energy_stat,
    gof_eval,
    ks_divergence,
    ks_stat,
    ks_windowed,
    make_scorer,
)
from .evaluation import (
    ScenarioKind,
    ScenarioSpec,
    TrialReport,
    adjusted_rand,
    e2t,
    generate_scenario,
    run_benchmark,
    t2e,
)
from .model import (
    ConfigError,
    Cp3oConfig,
    DetectionResult,
    GofMetric,
    MetricKind,
    Segmentation,
    TimeSeries,
    validate_config,
)
from .search import exhaustive_best_segmentation, run_cp3o, select_num_changes

__all__ = [
    "ConfigError",
    "Cp3oConfig",
    "DetectionResult",
    "GofMetric",
    "MetricKind",
    "ScenarioKind",
    "ScenarioSpec",
    "Segmentation",
    "TimeSeries",
    "TrialReport",
    "adjusted_rand",
    "e2t",
    "energy_divergence",
    "energy_incomplete",
    "energy_stat",
    "exhaustive_best_segmentation",
    "generate_scenario",
    "gof_eval",
    "ks_divergence",
    "ks_stat",
    "ks_windowed",
    "make_scorer",
    "run_benchmark",
    "run_cp3o",
    "select_num_changes",
    "t2e",
    "validate_config",
]
