"""Takagi-Sugeno fuzzy rainfall-runoff modeling.

Identify TS fuzzy models from input-output time series with
Gustafson-Kessel, fuzzy c-means, or subtractive clustering, pick the rule
count with cluster validity indices, and score multi-step-ahead forecasts
with hydrological error measures.
"""

from .clustering import (
    ClusterConfig,
    ClusterSet,
    DataMatrix,
    IterationTrace,
    NumericalError,
    PartitionMatrix,
    run_clustering,
    run_fcm,
    run_gk,
    run_sc,
    sc_partition,
)
from .core import (
    FiringVector,
    GaussianMf,
    TsModel,
    TsRule,
    load_model,
    predict,
    predict_batch,
    save_model,
)
from .dataio import (
    DataValidationError,
    EventSeries,
    NormalizationRecord,
    StormParams,
    SupervisedSet,
    build_supervised,
    estimate_lag,
    load_event_csv,
    synth_storm,
    write_event_csv,
)
from .evalmetrics import MetricSet, ce, metric_set, r, rmse, ve
from .identify import FitReport, fit_model
from .validity import ValidityReport, sweep_clusters

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig",
    "ClusterSet",
    "DataMatrix",
    "DataValidationError",
    "EventSeries",
    "FiringVector",
    "FitReport",
    "GaussianMf",
    "IterationTrace",
    "MetricSet",
    "NormalizationRecord",
    "NumericalError",
    "PartitionMatrix",
    "StormParams",
    "SupervisedSet",
    "TsModel",
    "TsRule",
    "ValidityReport",
    "build_supervised",
    "ce",
    "estimate_lag",
    "fit_model",
    "load_event_csv",
    "load_model",
    "metric_set",
    "predict",
    "predict_batch",
    "r",
    "rmse",
    "run_clustering",
    "run_fcm",
    "run_gk",
    "run_sc",
    "save_model",
    "sc_partition",
    "sweep_clusters",
    "synth_storm",
    "ve",
    "write_event_csv",
]
