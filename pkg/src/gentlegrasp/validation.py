"""Small input validation helpers shared by the configs and the estimators."""
import math

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidConfig


def as_vector3(value, name="vector"):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    return arr


def as_points(value, name="points"):
    """Coerce to a finite (n, 3) float array; a single 3-vector becomes (1, 3)."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def check_unit(vec, name="normal", tol=1e-9):
    vec = as_vector3(vec, name)
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"{name} must have unit norm within {tol}, got {norm!r}")
    return vec


def check_positive(value, name, strict=True, exc=InvalidConfig):
    value = float(value)
    if not math.isfinite(value) or (value <= 0 if strict else value < 0):
        bound = "> 0" if strict else ">= 0"
        raise exc(f"{name} must be {bound}, got {value!r}")
    return value


def check_observations(X):
    """Validate an observation stream: rows of (F_MER,n, F_MER,t)."""
    X = check_array(X, dtype=float, ensure_2d=True, ensure_min_samples=1)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (normal, tangential), got {X.shape[1]}")
    if np.any(X[:, 0] < 0):
        raise ValueError("normal resultant must be nonnegative")
    return X
