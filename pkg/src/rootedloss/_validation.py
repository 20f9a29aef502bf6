"""Input checks shared by the loss, calculus and model modules."""

import numpy as np


class DimensionError(ValueError):
    """Parameter and feature shapes disagree."""


class LabelError(ValueError):
    """Labels are of the wrong kind for the requested loss."""


def as_features(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    return X


def check_binary(X, y, w=None):
    """Validate a binary problem with labels in {+1, -1}.

    Returns float arrays ``(X, y)`` and, when given, ``w``.
    """
    X = as_features(X)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise LabelError("binary labels must be exactly +1 or -1")
    if w is None:
        return X, y
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != X.shape[1]:
        raise DimensionError(f"weights have {w.shape[0]} entries, data has d={X.shape[1]}")
    return X, y, w


def check_multiclass(X, y, W=None):
    X = as_features(X)
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but labels of shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise LabelError("class labels must be integer indices")
        y = y.astype(np.int64)
    if np.any(y < 0):
        raise LabelError("class index must be nonnegative")
    if W is None:
        return X, y
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[1] != X.shape[1]:
        raise DimensionError(f"weight matrix {W.shape} does not match d={X.shape[1]}")
    if W.shape[0] < 2:
        raise DimensionError("need at least two classes")
    if np.any(y >= W.shape[0]):
        raise LabelError(f"class index out of range for c={W.shape[0]}")
    return X, y, W


def check_root(k):
    """Validate k > 1; scalars come back as float, arrays as float arrays."""
    if np.ndim(k) == 0:
        if not k > 1:
            raise ValueError(f"root parameter k must exceed 1, got {k}")
        return float(k)
    k = np.asarray(k, dtype=float)
    if not np.all(k > 1):
        raise ValueError(f"root parameter k must exceed 1, got min {k.min()}")
    return k
