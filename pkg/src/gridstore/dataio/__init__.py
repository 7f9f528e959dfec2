from .case import CaseData, build_case, with_load_value
from .config import CaseConfig, ConfigError, FleetConfig, build_config, load_config, read_sections
from .results import KEYS, ROWS, ExperimentResult, experiment_metrics, format_cell, read_results, write_results
from .series import (
    DataError,
    MissingHourError,
    NonNumericError,
    PeakProjection,
    RawSeries,
    WrongLengthError,
    event_positions,
    load_scarcity_events,
    load_timeseries,
    scale_load_by_peak,
    select_representative_days,
)
from .synthetic import synthetic_year, write_synthetic_case

__all__ = [
    "KEYS", "ROWS", "CaseConfig", "CaseData", "ConfigError", "DataError", "ExperimentResult", "FleetConfig",
    "MissingHourError", "NonNumericError", "PeakProjection", "RawSeries", "WrongLengthError", "build_case",
    "build_config", "event_positions", "experiment_metrics", "format_cell", "load_config",
    "load_scarcity_events", "load_timeseries", "read_results", "read_sections", "scale_load_by_peak",
    "select_representative_days", "synthetic_year", "with_load_value", "write_results", "write_synthetic_case",
]
