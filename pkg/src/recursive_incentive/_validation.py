"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from .errors import DomainError, FitError


def check_samples(X, *, integer: bool = False, min_samples: int = 1,
                  name: str = "samples") -> np.ndarray:
    """Return ``X`` as a finite, strictly positive 1-D float array.

    Accepts a flat sequence or a single-column 2-D array, the way
    scikit-learn passes one feature.
    """
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contain non-finite values")
    if np.any(arr <= 0):
        raise DomainError(f"{name} must be strictly positive")
    if integer and np.any(arr != np.round(arr)):
        raise DomainError(f"{name} must be integers")
    if arr.size < min_samples:
        raise FitError(f"need at least {min_samples} {name}, got {arr.size}")
    return arr


def check_is_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        from sklearn.exceptions import NotFittedError
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")
