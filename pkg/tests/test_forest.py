import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackcast.errors import TooFewRows
from stackcast.evaluation import r_squared
from stackcast.learners import ForestParams, fit_forest, permutation_importance
from stackcast.learners.forest import ForestModel


def data(seed, n=200, k=4):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, k))
    return X, 3 * X[:, 0] - 2 * X[:, 1] + rng.normal(0, 0.1, n)


def test_constant_target():
    X, _ = data(0)
    m = fit_forest((X, np.full(len(X), 2.5)), ForestParams(ntree=10))
    assert np.all(m.predict_array(X) == 2.5)


def test_default_mtry():
    assert ForestParams().resolve_mtry(34) == 11
    assert ForestParams().resolve_mtry(2) == 1
    with pytest.raises(ValueError):
        ForestParams(mtry=5).resolve_mtry(3)


def test_single_leaf_tree_predicts_mean():
    X, y = data(1, n=30)
    m = fit_forest((X, y), ForestParams(ntree=1, bag_fraction=1.0, min_node_size=30))
    assert m.trees[0].n_leaves == 1
    assert m.predict_array(X[:3]) == pytest.approx(np.full(3, y.mean()))


@pytest.mark.parametrize("seed", range(10))
def test_identity_target(seed):
    rng = np.random.default_rng(seed)
    # one distractor column: with the n/3 rule mtry is 1, so half the splits are random
    X = rng.uniform(size=(200, 2))
    y = X[:, 0].copy()
    m = fit_forest((X, y), ForestParams(ntree=100, rng_seed=seed))
    assert r_squared(y, m.predict_array(X)) > 0.95
    assert np.argmax(m.importance) == 0 and np.sum(m.importance == m.importance.max()) == 1


@given(seed=st.integers(0, 2**20), min_leaf=st.integers(1, 12), bag=st.floats(0.3, 1.0))
@settings(max_examples=25, deadline=None)
def test_leaf_sizes_and_bounds(seed, min_leaf, bag):
    X, y = data(seed, n=120)
    m = fit_forest((X, y), ForestParams(ntree=5, min_node_size=min_leaf, bag_fraction=bag, rng_seed=seed))
    for t in m.trees:
        leaves = t.feature < 0
        assert np.all(t.n_node[leaves] >= min(min_leaf, t.n_node[0]))
    p = m.predict_array(np.random.default_rng(seed).uniform(-1, 2, size=(50, 4)))
    assert np.all(p >= y.min() - 1e-12) and np.all(p <= y.max() + 1e-12)
    assert np.all(m.importance >= 0)


def test_prediction_is_mean_over_trees():
    X, y = data(2)
    m = fit_forest((X, y), ForestParams(ntree=7))
    np.testing.assert_allclose(m.predict_array(X), np.mean([t.predict(X) for t in m.trees], axis=0), atol=1e-12)


def test_determinism_and_threads():
    X, y = data(3)
    a = fit_forest((X, y), ForestParams(ntree=20, rng_seed=5))
    b = fit_forest((X, y), ForestParams(ntree=20, rng_seed=5, n_jobs=3))
    c = fit_forest((X, y), ForestParams(ntree=20, rng_seed=6))
    assert np.array_equal(a.predict_array(X), b.predict_array(X))
    assert np.array_equal(a.importance, b.importance)
    assert not np.array_equal(a.predict_array(X), c.predict_array(X))


def test_oob_error_settles():
    X, y = data(4, n=400)
    few = fit_forest((X, y), ForestParams(ntree=10, rng_seed=1), compute_oob=True).oob_rmse(y)
    many = fit_forest((X, y), ForestParams(ntree=200, rng_seed=1), compute_oob=True).oob_rmse(y)
    assert many <= few * 1.05


def test_roundtrip_and_permutation_importance():
    X, y = data(5)
    m = fit_forest((X, y), ForestParams(ntree=15))
    back = ForestModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict_array(X), m.predict_array(X))
    pi = permutation_importance(m, X, y, seed=0)
    assert set(np.argsort(pi)[-2:]) == {0, 1}


def test_validation():
    with pytest.raises(TooFewRows):
        fit_forest((np.zeros((3, 2)), np.zeros(3)), ForestParams(min_node_size=5))
    for bad in (dict(ntree=0), dict(bag_fraction=0.0), dict(bag_fraction=1.5), dict(mtry=0)):
        with pytest.raises(ValueError):
            ForestParams(**bad)
