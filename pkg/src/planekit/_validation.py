"""Input validation helpers shared by the estimators and the function API."""

from __future__ import annotations

import numpy as np

__all__ = ["as_feature_matrix", "as_feature_vector", "check_workers"]


def as_feature_matrix(X, *, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a read-only float64 matrix of shape (n, d).

    Accepts anything array-like, plus objects exposing a ``features``
    attribute (datasets). Rejects empty or non-finite input.
    """
    features = getattr(X, "features", X)
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must contain at least one row and one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def as_feature_vector(x, *, dim: int | None = None, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if dim is not None and arr.size != dim:
        raise ValueError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


def check_workers(workers: int) -> int:
    workers = int(workers)
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    return workers
