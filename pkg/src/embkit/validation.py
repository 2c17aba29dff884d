"""Small input-validation helpers used across the package."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def require_positive(value, name: str):
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return value


def require_in(value, choices, name: str):
    if value not in choices:
        raise ConfigError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value


def check_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_samples(values, name: str, min_len: int = 1) -> np.ndarray:
    """Coerce to a finite 1-D float64 sample array with a length floor."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.ndim != 1 or arr.size < min_len:
        raise ConfigError(f"{name} must hold at least {min_len} values")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr
