"""Two-level stacked generalization.

Base learners produce out-of-fold predictions over repeated k-fold splits; the
repeats are averaged into one meta-feature per base learner, the meta-learner
is fit on those, and the base learners are then refit on all training rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cv_tuning import CvSpec, kfold_indices, with_context
from .errors import StackcastError, TooFewRows
from .learners import (ElasticNetParams, ForestParams, SvrParams, make_params, model_document,
                       model_from_document, rows_for)
from .learners._common import unpack


def _default_bases():
    return (ForestParams(), ElasticNetParams())


@dataclass(frozen=True)
class StackConfig:
    base_specs: tuple = field(default_factory=_default_bases)
    meta_spec: object = field(default_factory=lambda: SvrParams(cost=1.0, epsilon=0.01))
    folds: int = 10
    repeats: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "base_specs", tuple(self.base_specs))
        if not self.base_specs:
            raise ValueError("stacking needs at least one base learner")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    def base_names(self):
        names, seen = [], {}
        for s in self.base_specs:
            k = getattr(s, "kind", type(s).__name__)
            seen[k] = seen.get(k, 0) + 1
            names.append(k if seen[k] == 1 else f"{k}_{seen[k]}")
        return tuple(names)

    def to_dict(self):
        return {
            "base_specs": [{"kind": s.kind, "params": s.to_dict()} for s in self.base_specs],
            "meta_spec": {"kind": self.meta_spec.kind, "params": self.meta_spec.to_dict()},
            "folds": self.folds,
            "repeats": self.repeats,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            tuple(make_params(s["kind"], **s["params"]) for s in d["base_specs"]),
            make_params(d["meta_spec"]["kind"], **d["meta_spec"]["params"]),
            int(d["folds"]), int(d["repeats"]), int(d["rng_seed"]),
        )


@dataclass(frozen=True)
class FoldProvenance:
    """Which rows trained the base model whose predictions filled ``predicted`` rows."""

    repeat: int
    fold: int
    base: int
    trained_on: np.ndarray
    predicted: np.ndarray


@dataclass
class StackedModel:
    bases: list
    meta: object
    base_names: tuple
    columns: tuple
    config: StackConfig | None = None
    meta_features: np.ndarray = field(default=None, repr=False, compare=False)
    provenance: list = field(default_factory=list, repr=False, compare=False)

    kind = "stack"

    def base_predictions(self, X):
        return np.column_stack([b.predict_array(X) for b in self.bases])

    def predict_array(self, X):
        X = np.asarray(X, dtype=np.float64)
        return self.meta.predict_array(self.base_predictions(X))

    def to_dict(self):
        return {
            "kind": self.kind,
            "columns": list(self.columns),
            "base_names": list(self.base_names),
            "bases": [model_document(b) for b in self.bases],
            "meta": model_document(self.meta),
            "config": self.config.to_dict() if self.config is not None else None,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = StackConfig.from_dict(d["config"]) if d.get("config") else None
        return cls([model_from_document(b) for b in d["bases"]], model_from_document(d["meta"]),
                   tuple(d["base_names"]), tuple(d["columns"]), cfg)


def out_of_fold(X, y, columns, cfg: StackConfig):
    """Averaged out-of-fold base predictions ``(n, n_bases)`` plus per-fit provenance."""
    n = len(y)
    if n < cfg.folds:
        raise TooFewRows(f"{n} rows cannot fill {cfg.folds} folds")
    ids = kfold_indices(n, CvSpec(cfg.folds, cfg.repeats, cfg.rng_seed))
    meta = np.zeros((n, len(cfg.base_specs)))
    provenance = []
    for r in range(cfg.repeats):
        for f in range(cfg.folds):
            train = np.flatnonzero(ids[r] != f)
            valid = np.flatnonzero(ids[r] == f)
            for b, spec in enumerate(cfg.base_specs):
                try:
                    model = spec.fit(X[train], y[train], columns)
                    meta[valid, b] += model.predict_array(X[valid])
                except StackcastError as exc:
                    raise with_context(exc, f"base learner {b} ({spec.kind}), repeat {r}, fold {f}") from exc
                provenance.append(FoldProvenance(r, f, b, train, valid))
    return meta / cfg.repeats, provenance


def fit_stack(m, cfg: StackConfig = StackConfig(), oof=None) -> StackedModel:
    """``oof`` reuses a ``(meta_features, provenance)`` pair from :func:`out_of_fold` on the same data."""
    X, y, columns = unpack(m)
    meta_X, provenance = out_of_fold(X, y, columns, cfg) if oof is None else oof
    names = cfg.base_names()
    meta = cfg.meta_spec.fit(meta_X, y, names)
    bases = []
    for b, spec in enumerate(cfg.base_specs):
        try:
            bases.append(spec.fit(X, y, columns))
        except StackcastError as exc:
            raise with_context(exc, f"base learner {b} ({spec.kind}) full refit") from exc
    return StackedModel(bases, meta, names, columns, cfg, meta_X, provenance)


def predict_stack(model: StackedModel, rows):
    return model.predict_array(rows_for(model, rows))
