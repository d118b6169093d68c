"""Linear-kernel epsilon-insensitive support vector regression.

The dual is solved by SMO over pairs of multipliers, so the prediction is
``h(x) = v.x + b`` with ``v = sum_i (a*_i - a_i) x_i``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DidNotConverge, TooFewRows
from ._common import check_finite, unpack


@dataclass(frozen=True)
class SvrParams:
    cost: float = 1.0
    epsilon: float = 0.1
    tol: float = 1e-3  # stop when the maximal KKT violation drops below this
    max_passes: int = 10_000  # iteration cap, in multiples of the row count

    kind = "svr"

    def __post_init__(self):
        if self.cost <= 0:
            raise ValueError(f"cost must be positive, got {self.cost}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def fit(self, X, y, columns=None):
        return fit_svr((X, y) if columns is None else (X, y, columns), self)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SvrModel:
    weights: np.ndarray
    bias: float
    dual_coef: np.ndarray  # a*_i - a_i per training row
    columns: tuple
    params: SvrParams = field(default_factory=SvrParams)
    n_iter: int = 0
    converged: bool = True

    kind = "svr"

    @property
    def support(self):
        return np.flatnonzero(self.dual_coef != 0)

    @property
    def alpha_star(self):
        return np.maximum(self.dual_coef, 0.0)

    @property
    def alpha(self):
        return np.maximum(-self.dual_coef, 0.0)

    def predict_array(self, X):
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "columns": list(self.columns),
            "weights": self.weights.tolist(),
            "bias": float(self.bias),
            "dual_coef": self.dual_coef.tolist(),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["weights"], dtype=np.float64), float(d["bias"]),
                   np.array(d["dual_coef"], dtype=np.float64), tuple(d["columns"]),
                   SvrParams.from_dict(d["params"]), int(d.get("n_iter", 0)),
                   bool(d.get("converged", True)))


def fit_svr(m, p: SvrParams = SvrParams()) -> SvrModel:
    """Fit on pre-normalized features (scaling is the caller's job)."""
    X, y, columns = unpack(m)
    check_finite(X, y)
    n, k = X.shape
    if n == 0:
        raise TooFewRows("SVR needs at least one row")
    if n == 1:
        return SvrModel(np.zeros(k), float(y[0]), np.zeros(1), columns, p)
    K = X @ X.T
    max_iter = int(p.max_passes) * n
    beta, b, n_iter, converged = _kernels.svr_smo(K, y, p.cost, p.epsilon, p.tol, max_iter)
    beta = np.asarray(beta)
    if not converged:
        warnings.warn(f"SVR stopped after {n_iter} SMO iterations without meeting tol={p.tol}",
                      DidNotConverge, stacklevel=2)
    weights = beta @ X
    return SvrModel(weights, float(b), beta, columns, p, int(n_iter), bool(converged))


def primal_objective(weights, bias, X, y, cost, epsilon):
    """``0.5 |v|^2 + C * sum max(0, |y - v.x - b| - eps)``."""
    r = np.asarray(y) - (np.asarray(X) @ np.asarray(weights) + bias)
    return 0.5 * float(np.dot(weights, weights)) + cost * float(np.maximum(np.abs(r) - epsilon, 0.0).sum())
