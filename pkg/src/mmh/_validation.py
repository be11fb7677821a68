"""Input validation shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils import check_array

from .errors import ManifoldTestError


def check_cloud(X, *, allow_empty=False, name="X"):
    """Return ``X`` as a C-contiguous float64 array of shape (n, D).

    Every coordinate must be finite. A 1-d input is read as a single point.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim == 2 and X.shape[0] == 0:
        if allow_empty:
            return np.empty((0, X.shape[1]))
        raise ManifoldTestError("empty-set", f"{name} has no points")
    return check_array(
        X, dtype=np.float64, order="C", ensure_all_finite=True, input_name=name
    )


def check_indices(idx, n):
    idx = np.asarray(idx, dtype=np.intp).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ManifoldTestError("bad-index", f"indices must lie in [0, {n})")
    return idx


def check_threshold(t):
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ManifoldTestError("bad-threshold", f"t={t} not in [0, 1]")
    return t
