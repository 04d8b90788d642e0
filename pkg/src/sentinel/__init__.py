"""Subspace-based process-level anomaly detection for industrial sensor streams."""

from sentinel.errors import ConfigError, DataError, NumericalError, SentinelError
from sentinel.ingest import CsvSchema, Dataset, Measurement, SensorSeries, SplitSpec, load_csv, split, write_csv
from sentinel.ssa import SubspaceModel, embed, fit_subspace, project
from sentinel.boundary import (
    EllipsoidBoundary,
    SphereBoundary,
    collect_cloud,
    fit_boundaries,
    fit_ellipsoid,
    fit_sphere,
)
from sentinel.detector import DetectorState, PlantAlarm, ScoreEvent, aggregate, score_series

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "SentinelError",
    "CsvSchema",
    "Dataset",
    "Measurement",
    "SensorSeries",
    "SplitSpec",
    "load_csv",
    "split",
    "write_csv",
    "SubspaceModel",
    "embed",
    "fit_subspace",
    "project",
    "EllipsoidBoundary",
    "SphereBoundary",
    "collect_cloud",
    "fit_boundaries",
    "fit_ellipsoid",
    "fit_sphere",
    "DetectorState",
    "PlantAlarm",
    "ScoreEvent",
    "aggregate",
    "score_series",
]
