"""Regression learners behind one fit/predict contract.

Each ``*Params`` class has a ``kind`` tag and ``fit(X, y, columns)`` returning a
model; every model has ``columns``, ``predict_array(X)`` and ``to_dict()``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ColumnMismatch
from ..indicators import FeatureMatrix
from .elastic_net import ElasticNetModel, ElasticNetParams, elastic_net_path, fit_elastic_net, lambda_max
from .forest import ForestModel, ForestParams, fit_forest, permutation_importance
from .svr import SvrModel, SvrParams, fit_svr, primal_objective

MODEL_FORMAT = "stackcast.model"
MODEL_VERSION = 1

PARAMS = {
    "glmnet": ElasticNetParams,
    "rf": ForestParams,
    "svr": SvrParams,
}


def make_params(kind, **values):
    try:
        cls = PARAMS[kind]
    except KeyError:
        raise ValueError(f"unknown learner kind {kind!r}; expected one of {sorted(PARAMS)}") from None
    return cls.from_dict(values)


def rows_for(model, rows):
    """Extract the design matrix for ``model`` from a FeatureMatrix (column-checked) or array."""
    if isinstance(rows, FeatureMatrix):
        if tuple(rows.column_names) != tuple(model.columns):
            raise ColumnMismatch(
                f"model expects columns {list(model.columns)}, got {list(rows.column_names)}"
            )
        return rows.X
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != len(model.columns):
        raise ColumnMismatch(f"model expects {len(model.columns)} columns, got {X.shape[1]}")
    return X


def predict(model, rows):
    """Predict with any fitted model (elastic net, forest, SVR or stack)."""
    return model.predict_array(rows_for(model, rows))


def model_document(model, extra=None):
    doc = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    doc.update(model.to_dict())
    if extra:
        doc.update(extra)
    return doc


def model_from_document(doc):
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a stackcast model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')}")
    kind = doc["kind"]
    if kind == "glmnet":
        return ElasticNetModel.from_dict(doc)
    if kind == "rf":
        return ForestModel.from_dict(doc)
    if kind == "svr":
        return SvrModel.from_dict(doc)
    if kind == "stack":
        from ..stacking import StackedModel

        return StackedModel.from_dict(doc)
    raise ValueError(f"unknown model kind {kind!r}")


def dumps_model(model, extra=None):
    return json.dumps(model_document(model, extra), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model, path, extra=None):
    Path(path).write_text(dumps_model(model, extra))


def load_model(path):
    return model_from_document(json.loads(Path(path).read_text()))


__all__ = [
    "ElasticNetModel", "ElasticNetParams", "elastic_net_path", "fit_elastic_net", "lambda_max",
    "ForestModel", "ForestParams", "fit_forest", "permutation_importance",
    "SvrModel", "SvrParams", "fit_svr", "primal_objective",
    "PARAMS", "make_params", "predict", "save_model", "load_model", "dumps_model",
    "model_document", "model_from_document",
]
