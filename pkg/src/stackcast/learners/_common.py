import numpy as np

from ..errors import NonFiniteInput
from ..indicators import FeatureMatrix


def unpack(m):
    """Return ``(X, y, columns)`` from a FeatureMatrix or an ``(X, y[, columns])`` tuple."""
    if isinstance(m, FeatureMatrix):
        return np.asarray(m.X, dtype=np.float64), np.asarray(m.target, dtype=np.float64), m.column_names
    X, y, *rest = m
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    columns = tuple(rest[0]) if rest else tuple(f"x{j}" for j in range(X.shape[1]))
    return X, np.asarray(y, dtype=np.float64), columns


def check_finite(X, y):
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("training data contains NaN or infinite values")
