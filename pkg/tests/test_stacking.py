import json

import numpy as np
import pytest

from stackcast.errors import ColumnMismatch, TooFewRows
from stackcast.evaluation import rmse
from stackcast.indicators import FeatureMatrix
from stackcast.learners import (ElasticNetParams, ForestParams, SvrParams, dumps_model, load_model,
                                model_from_document, save_model)
from stackcast.stacking import StackConfig, fit_stack, out_of_fold, predict_stack


class FirstColumn:
    """Base 'learner' that ignores training and predicts column 0."""

    kind = "oracle"

    def fit(self, X, y, columns=None):
        return _Col(columns)

    def to_dict(self):
        return {}


class _Col:
    def __init__(self, columns):
        self.columns = columns

    def predict_array(self, X):
        return np.asarray(X)[:, 0].copy()


def data(seed=0, n=150):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 4))
    return X, 2 * X[:, 0] + X[:, 1] ** 2 + rng.normal(0, 0.05, n)


def small_cfg(**kw):
    base = dict(base_specs=(ForestParams(ntree=20), ElasticNetParams()), folds=5, repeats=2)
    return StackConfig(**{**base, **kw})


def test_oracle_base_is_recovered():
    X, _ = data()
    y = X[:, 0].copy()
    exact = fit_stack((X, y), StackConfig((FirstColumn(),), SvrParams(1.0, 0.0, tol=1e-10), folds=5, repeats=2))
    assert rmse(y, exact.predict_array(X)) < 1e-6
    # with the default tube the meta model is only pinned down to within epsilon
    tube = fit_stack((X, y), StackConfig((FirstColumn(),), folds=5, repeats=2))
    assert rmse(y, tube.predict_array(X)) <= 0.01


def test_identical_bases():
    X, y = data(1)
    cfg = small_cfg(base_specs=(ElasticNetParams(), ElasticNetParams()))
    m = fit_stack((X, y), cfg)
    assert m.base_names == ("glmnet", "glmnet_2")
    assert np.array_equal(m.meta_features[:, 0], m.meta_features[:, 1])
    p = m.predict_array(X)
    assert np.all(np.isfinite(p))
    assert m.meta.weights.shape == (2,)


def test_meta_combines_base_predictions():
    X, y = data(2)
    m = fit_stack((X, y), small_cfg())
    P = m.base_predictions(X)
    np.testing.assert_allclose(m.predict_array(X), P @ m.meta.weights + m.meta.bias, atol=1e-12)
    assert m.predict_array(X[:1]).shape == (1,)


def test_oof_partitions_rows():
    X, y = data(3, n=60)
    cfg = small_cfg(folds=4, repeats=3)
    meta, prov = out_of_fold(X, y, ("a", "b", "c", "d"), cfg)
    assert meta.shape == (60, 2) and len(prov) == 4 * 3 * 2
    for p in prov:
        assert np.intersect1d(p.trained_on, p.predicted).size == 0
    # each meta value is the average of predictions from models that never saw the row
    seen = {}
    for p in prov:
        for i in p.predicted:
            seen.setdefault((p.base, int(i)), []).append(p.repeat)
    assert all(sorted(v) == [0, 1, 2] for v in seen.values())


def test_roundtrip(tmp_path):
    X, y = data(4)
    fm = FeatureMatrix(("a", "b", "c", "d"), X, y, np.datetime64("2018-01-01") + np.arange(len(y)))
    m = fit_stack(fm, small_cfg())
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert np.array_equal(back.predict_array(X), m.predict_array(X))
    assert back.config == m.config
    assert dumps_model(back) == dumps_model(m)
    assert np.array_equal(predict_stack(back, fm), m.predict_array(X))
    with pytest.raises(ColumnMismatch):
        predict_stack(back, fm.select(["a", "b"]))
    doc = json.loads((tmp_path / "m.json").read_text())
    assert model_from_document(doc).kind == "stack"


def test_deterministic():
    X, y = data(5)
    assert dumps_model(fit_stack((X, y), small_cfg(rng_seed=3))) == dumps_model(fit_stack((X, y), small_cfg(rng_seed=3)))


def test_errors():
    X, y = data(6, n=4)
    with pytest.raises(TooFewRows):
        fit_stack((X, y), small_cfg(folds=5))
    with pytest.raises(ValueError):
        StackConfig(base_specs=())
    with pytest.raises(ValueError):
        StackConfig(folds=1)
    X, y = data(7, n=40)
    with pytest.raises(TooFewRows, match="base learner 0"):
        fit_stack((X, y), small_cfg(base_specs=(ForestParams(ntree=5, min_node_size=40),)))


def test_config_roundtrip():
    cfg = small_cfg(meta_spec=SvrParams(0.5, 0.02), rng_seed=4)
    assert StackConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
