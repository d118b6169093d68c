"""Random forest regression on variance-reduction trees.

Each tree is grown on a ``bag_fraction`` subsample drawn without replacement
(``replace=True`` switches to a classic size-N bootstrap) and tries ``mtry``
randomly chosen features at every split. Split ties go to the lowest feature
index, then the lowest threshold.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _kernels
from ..errors import TooFewRows
from ._common import check_finite, unpack


@dataclass(frozen=True)
class ForestParams:
    ntree: int = 500
    mtry: int | None = None  # None: floor(n_features / 3), at least 1
    bag_fraction: float = 0.5
    min_node_size: int = 5
    max_depth: int | None = None
    replace: bool = False
    rng_seed: int = 0
    n_jobs: int = 1

    kind = "rf"

    def __post_init__(self):
        if self.ntree < 1:
            raise ValueError("ntree must be >= 1")
        if not 0.0 < self.bag_fraction <= 1.0:
            raise ValueError("bag_fraction must lie in (0, 1]")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")

    def resolve_mtry(self, n_features):
        if self.mtry is None:
            return max(1, n_features // 3)
        if self.mtry > n_features:
            raise ValueError(f"mtry={self.mtry} exceeds the {n_features} available features")
        return self.mtry

    def fit(self, X, y, columns=None):
        return fit_forest((X, y) if columns is None else (X, y, columns), self)

    def to_dict(self):
        d = asdict(self)
        d.pop("n_jobs")
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray

    def predict(self, X):
        return _kernels.predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_node": self.n_node.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["feature"], dtype=np.int64),
            np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64),
            np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64),
            np.array(d["n_node"], dtype=np.int64),
        )


@dataclass
class ForestModel:
    trees: list
    importance: np.ndarray
    columns: tuple
    params: ForestParams = field(default_factory=ForestParams)
    mtry: int = 1
    oob_prediction: np.ndarray = field(default=None, repr=False, compare=False)

    kind = "rf"

    def predict_array(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        acc = np.zeros(X.shape[0])
        for t in self.trees:
            acc += t.predict(X)
        return acc / len(self.trees)

    def oob_rmse(self, y):
        ok = np.isfinite(self.oob_prediction)
        return float(np.sqrt(np.mean((self.oob_prediction[ok] - y[ok]) ** 2)))

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": self.params.to_dict(),
            "columns": list(self.columns),
            "mtry": int(self.mtry),
            "importance": self.importance.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls([Tree.from_dict(t) for t in d["trees"]], np.array(d["importance"], dtype=np.float64),
                   tuple(d["columns"]), ForestParams.from_dict(d["params"]), int(d["mtry"]))


def draw_bags(n, p: ForestParams):
    """Per-tree ``(row indices, split seed)`` derived from ``p.rng_seed``."""
    out = []
    m = max(1, int(math.floor(p.bag_fraction * n)))
    for child in np.random.SeedSequence(p.rng_seed).spawn(p.ntree):
        g = np.random.default_rng(child)
        if p.replace:
            rows = np.sort(g.integers(0, n, size=n))
        else:
            rows = np.sort(g.choice(n, size=m, replace=False))
        out.append((rows, int(g.integers(0, 2 ** 63 - 1))))
    return out


def fit_forest(m, p: ForestParams = ForestParams(), bags=None, compute_oob=False) -> ForestModel:
    """Grow ``p.ntree`` trees. ``bags`` overrides the seed-derived subsamples."""
    X, y, columns = unpack(m)
    check_finite(X, y)
    n, k = X.shape
    if n < p.min_node_size or n == 0:
        raise TooFewRows(f"forest needs at least min_node_size={p.min_node_size} rows, got {n}")
    mtry = p.resolve_mtry(k)
    X = np.ascontiguousarray(X)
    bags = draw_bags(n, p) if bags is None else bags
    max_depth = -1 if p.max_depth is None else int(p.max_depth)

    def grow(bag):
        rows, seed = bag
        f, t, l, r, v, nn, imp = _kernels.build_tree(X, y, rows, mtry, p.min_node_size, max_depth, seed)
        return Tree(f, t, l, r, v, nn), imp

    if p.n_jobs and p.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=p.n_jobs) as pool:
            grown = list(pool.map(grow, bags))
    else:
        grown = [grow(b) for b in bags]

    importance = np.zeros(k)
    for _, imp in grown:
        importance += imp
    importance /= len(grown)
    model = ForestModel([t for t, _ in grown], importance, columns, p, mtry)

    if compute_oob:
        acc = np.zeros(n)
        cnt = np.zeros(n)
        for (tree, _), (rows, _) in zip(grown, bags):
            out = np.ones(n, dtype=bool)
            out[rows] = False
            if out.any():
                acc[out] += tree.predict(X[out])
                cnt[out] += 1
        with np.errstate(invalid="ignore", divide="ignore"):
            model.oob_prediction = np.where(cnt > 0, acc / np.maximum(cnt, 1), np.nan)
    return model


def permutation_importance(model: ForestModel, X, y, seed=0, n_repeats=1):
    """Mean increase in MSE when each column of ``X`` is shuffled."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    base = np.mean((model.predict_array(X) - y) ** 2)
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        for _ in range(n_repeats):
            Xp = X.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            out[j] += np.mean((model.predict_array(Xp) - y) ** 2) - base
    return out / n_repeats
