"""Elastic-net linear regression by cyclic coordinate descent.

Minimizes ``(1/N) sum 0.5 (y_i - a0 - a.x_i)^2 + lam * ((1 - g)/2 |a|_2^2 + g |a|_1)``
with an unpenalized intercept. With ``standardize=True`` (the default) the
penalty applies to coefficients of the population-standardized features and
the returned coefficients are mapped back to the original scale.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DidNotConverge, TooFewRows
from ._common import check_finite, unpack


@dataclass(frozen=True)
class ElasticNetParams:
    alpha: float = 1.0  # mixing: 1 = lasso, 0 = ridge
    lambda_: float = 1e-4
    max_iter: int = 10_000
    tol: float = 1e-7  # bound on max_j mean(x_j^2) * db_j^2, relative to var(y)
    standardize: bool = True

    kind = "glmnet"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_ < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lambda_}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def fit(self, X, y, columns=None):
        return fit_elastic_net((X, y) if columns is None else (X, y, columns), self)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        return cls(**d)


@dataclass
class ElasticNetModel:
    intercept: float
    coef: np.ndarray
    columns: tuple
    params: ElasticNetParams = field(default_factory=ElasticNetParams)
    n_sweeps: int = 0
    converged: bool = True
    objective_history: np.ndarray = field(default=None, repr=False, compare=False)

    kind = "glmnet"

    def predict_array(self, X):
        return self.intercept + np.asarray(X, dtype=np.float64) @ self.coef

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "columns": list(self.columns),
            "intercept": float(self.intercept),
            "coef": [float(c) for c in self.coef],
            "n_sweeps": int(self.n_sweeps),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["intercept"]), np.array(d["coef"], dtype=np.float64), tuple(d["columns"]),
                   ElasticNetParams.from_dict(d["params"]), int(d.get("n_sweeps", 0)),
                   bool(d.get("converged", True)))


class _Design:
    """Centered (and optionally standardized) design shared along a lambda path."""

    def __init__(self, X, y, standardize):
        self.x_mean = X.mean(axis=0)
        self.y_mean = float(y.mean())
        Xc = X - self.x_mean
        if standardize:
            sd = np.sqrt((Xc ** 2).mean(axis=0))
        else:
            sd = np.ones(X.shape[1])
        self.const = sd == 0
        self.scale = np.where(self.const, 1.0, sd)
        Xs = Xc / self.scale
        Xs[:, self.const] = 0.0
        self.Xs = np.asfortranarray(Xs)
        self.yc = y - self.y_mean
        self.xsq = (self.Xs ** 2).mean(axis=0)

    def unscale(self, beta):
        coef = np.where(self.const, 0.0, beta / self.scale)
        return self.y_mean - float(self.x_mean @ coef), coef


def _solve(design, params, beta0):
    # tol is relative to the variance of the centered response
    var = float(np.mean(design.yc ** 2))
    tol = params.tol * (var if var > 0 else 1.0)
    beta, sweeps, delta, hist = _kernels.enet_cd(
        design.Xs, design.yc, beta0, params.lambda_, params.alpha, design.xsq,
        params.max_iter, tol,
    )
    converged = bool(delta < tol)
    if not converged:
        warnings.warn(
            f"elastic net stopped after {sweeps} sweeps; largest fit change {delta:.3g} above {tol:.3g}",
            DidNotConverge, stacklevel=3,
        )
    return np.asarray(beta), int(sweeps), converged, np.asarray(hist)


def fit_elastic_net(m, p: ElasticNetParams = ElasticNetParams()) -> ElasticNetModel:
    """Fit on a FeatureMatrix (or ``(X, y[, columns])`` tuple)."""
    X, y, columns = unpack(m)
    check_finite(X, y)
    n, k = X.shape
    if n == 0:
        raise TooFewRows("elastic net needs at least one row")
    if n == 1:
        return ElasticNetModel(float(y[0]), np.zeros(k), columns, p)
    design = _Design(X, y, p.standardize)
    beta, sweeps, converged, hist = _solve(design, p, np.zeros(k))
    intercept, coef = design.unscale(beta)
    return ElasticNetModel(intercept, coef, columns, p, sweeps, converged, hist)


def lambda_max(m, alpha=1.0, standardize=True):
    """Smallest lambda at which every coefficient is zero (alpha floored at 1e-3 for ridge)."""
    X, y, _ = unpack(m)
    d = _Design(X, y, standardize)
    return float(np.max(np.abs(d.Xs.T @ d.yc)) / len(y) / max(alpha, 1e-3))


def elastic_net_path(m, alpha=1.0, lambdas=None, n_lambda=100, ratio=1e-4, **kw):
    """Warm-started fits along a decreasing lambda grid.

    The default grid is ``n_lambda`` log-spaced values from :func:`lambda_max`
    down to ``ratio * lambda_max``.
    """
    X, y, columns = unpack(m)
    check_finite(X, y)
    standardize = kw.get("standardize", True)
    design = _Design(X, y, standardize)
    if lambdas is None:
        top = float(np.max(np.abs(design.Xs.T @ design.yc)) / len(y) / max(alpha, 1e-3))
        top = top if top > 0 else 1.0
        lambdas = np.geomspace(top, top * ratio, n_lambda)
    lambdas = sorted((float(v) for v in lambdas), reverse=True)
    beta = np.zeros(X.shape[1])
    models = []
    for lam in lambdas:
        p = ElasticNetParams(alpha=alpha, lambda_=lam, **kw)
        beta, sweeps, converged, hist = _solve(design, p, beta)
        intercept, coef = design.unscale(beta)
        models.append(ElasticNetModel(intercept, coef, columns, p, sweeps, converged, hist))
    return models
