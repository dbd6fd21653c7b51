"""Input checks shared by the estimator, the model types and the CLI."""

import numpy as np
from sklearn.utils import check_array


def check_interdeparture(y, *, max_n=None):
    """Return ``y`` as a fresh 1-d float64 array of positive finite times."""
    y = check_array(y, ensure_2d=False, dtype=np.float64, copy=True, input_name="y")
    if y.ndim == 2 and 1 in y.shape:
        y = y.reshape(-1)
    if y.ndim != 1:
        raise ValueError(f"y must be one-dimensional, got shape {y.shape}")
    if y.shape[0] < 1:
        raise ValueError("y must contain at least one interdeparture time")
    if np.any(y <= 0):
        raise ValueError("interdeparture times must be strictly positive")
    if max_n is not None and y.shape[0] > max_n:
        raise ValueError(f"at most {max_n} observations supported here, got {y.shape[0]}")
    return np.ascontiguousarray(y)


def check_triple(values, name, *, positive=True):
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have three entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if positive and np.any(arr <= 0):
        raise ValueError(f"{name} entries must be positive")
    return arr


def check_fraction(value, name, lo=0.0, hi=1.0):
    value = float(value)
    if not lo <= value <= hi:
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return value
