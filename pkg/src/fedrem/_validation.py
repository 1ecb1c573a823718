"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array


def check_positive(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_samples_1d(x, name: str = "samples") -> np.ndarray:
    """Return ``x`` as a finite float64 vector.

    Accepts a 1-D array or an ``(n, 1)`` column, the latter being what
    scikit-learn pipelines hand to estimators.
    """
    x = np.asarray(x)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    x = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    return x


def as_generator(seed) -> np.random.Generator:
    """Turn any numpy seed-like value into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
