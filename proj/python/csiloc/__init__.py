"""CSI fingerprint localization: simulator, CNN quantifier, LSTM tracker and metrics."""

from ._core import (
    ConfigError,
    DataError,
    InputError,
    NumericError,
    Quantifier,
    Tracker,
    UsageError,
    average_amplitude,
    average_self_correlation,
    count_ambiguous,
    error_report,
    load_database,
    median_filter,
    minmax_normalize_rows,
    pearson,
    preprocess,
    run_experiment,
    synthesize,
)

__all__ = [
    "ConfigError",
    "DataError",
    "InputError",
    "NumericError",
    "Quantifier",
    "Tracker",
    "UsageError",
    "average_amplitude",
    "average_self_correlation",
    "count_ambiguous",
    "error_report",
    "load_database",
    "median_filter",
    "minmax_normalize_rows",
    "pearson",
    "preprocess",
    "run_experiment",
    "synthesize",
]
