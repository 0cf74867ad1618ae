"""Input checks shared by the estimators."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .core import Dataset, Metric


def check_points(X, metric=None, min_samples: int = 1) -> np.ndarray:
    """Validate a point matrix (or a square matrix when precomputed)."""
    if isinstance(X, Dataset):
        X = X.points
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples,
                    ensure_all_finite=True, copy=False)
    if metric == "precomputed":
        if X.shape[0] != X.shape[1]:
            raise ValueError("precomputed dissimilarities must be a square matrix")
        if np.any(X < 0) or not np.array_equal(X, X.T):
            raise ValueError("precomputed dissimilarities must be symmetric and non-negative")
    elif metric is not None and Metric.coerce(metric) is Metric.COSINE:
        if np.any(np.linalg.norm(X, axis=1) == 0):
            raise ValueError("cosine dissimilarity is undefined for zero vectors")
    return X


def check_metric(metric, allow_precomputed: bool = True):
    if allow_precomputed and metric == "precomputed":
        return metric
    return Metric.coerce(metric)


def check_int(value, name: str, low: int | None = None, high: int | None = None,
              allow_none: bool = False):
    if value is None and allow_none:
        return None
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if low is not None and value < low:
        raise ValueError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValueError(f"{name} must be <= {high}, got {value}")
    return int(value)


def check_nonnegative(value, name: str, strict: bool = False) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ValueError(f"{name} must be {'>' if strict else '>='} 0, got {value}")
    return float(value)
