"""Input checks shared by the estimator wrappers, raising library errors."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import ConfigError, ShapeError


def as_matrix(X, name: str = "X", min_rows: int = 1, min_cols: int = 1) -> np.ndarray:
    """2-D float array with finite entries; 1-D input becomes a single column."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    try:
        X = check_array(X, dtype=float, ensure_min_samples=min_rows, ensure_min_features=min_cols)
    except ValueError as exc:
        raise ShapeError(f"{name}: {exc}") from None
    return X


def as_series(y, name: str = "y", length: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and 1 in y.shape:
        y = y.reshape(-1)
    if y.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ShapeError(f"{name} contains non-finite values")
    if length is not None and y.size != length:
        raise ShapeError(f"{name} has length {y.size}, expected {length}")
    return y


def check_level(level: float) -> float:
    level = float(level)
    if not 0 < level < 1:
        raise ConfigError(f"significance level must lie in (0, 1), got {level}")
    return level


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)
