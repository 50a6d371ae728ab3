"""Input validation helpers for array-like point data."""

from __future__ import annotations

import numpy as np


def as_xyz_array(points, allow_nonfinite: bool = False) -> np.ndarray:
    """Coerce to a float64 (N, 3) array of xyz coordinates."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (N, 3) xyz array, got shape {arr.shape}")
    if not allow_nonfinite and not np.isfinite(arr).all():
        raise ValueError("xyz array contains non-finite values")
    return arr


def as_xy_array(points, allow_nonfinite: bool = False) -> np.ndarray:
    """Coerce to a float64 (N, 2) array of xy coordinates."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (N, 2) xy array, got shape {arr.shape}")
    if not allow_nonfinite and not np.isfinite(arr).all():
        raise ValueError("xy array contains non-finite values")
    return arr


def as_unit_vector(v, tol: float = 1e-6) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or abs(n - 1.0) > tol:
        raise ValueError(f"expected a unit 3-vector, got norm {n}")
    return v
