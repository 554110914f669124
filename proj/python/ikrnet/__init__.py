"""IKr-block ECG classifier: synthetic data, model inference and evaluation."""

from ._ikrnet import (
    ConfigError,
    DegenerateSignal,
    Error,
    InsufficientBeats,
    IntegrityError,
    InvalidArgument,
    Model,
    ShapeError,
    UndefinedRoc,
    cli,
    evaluate,
    generate,
    heart_rate,
    model_config,
    resample,
    standardize,
)

__all__ = [
    "ConfigError",
    "DegenerateSignal",
    "Error",
    "InsufficientBeats",
    "IntegrityError",
    "InvalidArgument",
    "Model",
    "ShapeError",
    "UndefinedRoc",
    "cli",
    "evaluate",
    "generate",
    "heart_rate",
    "model_config",
    "resample",
    "standardize",
]
