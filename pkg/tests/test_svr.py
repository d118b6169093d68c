import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stackcast.errors import NonFiniteInput
from stackcast.learners import SvrParams, fit_svr, primal_objective
from stackcast.learners.svr import SvrModel


def test_constant_target():
    X = np.random.default_rng(0).normal(size=(20, 3))
    m = fit_svr((X, np.full(20, 3.0)), SvrParams(cost=1.0, epsilon=0.1))
    assert np.allclose(m.weights, 0) and m.bias == pytest.approx(3.0, abs=0.1)
    assert m.support.size == 0


def test_six_point_oracle():
    x = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    y = np.array([0.1, 0.9, 2.2, 2.8, 4.3, 4.9])
    m = fit_svr((x, y), SvrParams(cost=2.0, epsilon=0.2, tol=1e-10))
    got = primal_objective(m.weights, m.bias, x[:, None], y, 2.0, 0.2)
    assert got == pytest.approx(oracles.svr_1d_optimum(x, y, 2.0, 0.2), abs=1e-4)


def test_interpolation_limit():
    x = np.linspace(-1, 1, 15)
    m = fit_svr((x, 2 * x + 1), SvrParams(cost=1e4, epsilon=0.0, tol=1e-9))
    assert m.weights[0] == pytest.approx(2.0, abs=1e-3)
    assert m.bias == pytest.approx(1.0, abs=1e-3)


@given(seed=st.integers(0, 2**20), C=st.floats(0.05, 10.0), eps=st.floats(0.0, 0.5), n=st.integers(2, 30))
@settings(max_examples=50, deadline=None)
def test_dual_invariants(seed, C, eps, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = X @ np.array([1.0, -0.5]) + rng.normal(0, 0.5, n)
    m = fit_svr((X, y), SvrParams(cost=C, epsilon=eps, tol=1e-8))
    a, a_star = m.alpha, m.alpha_star
    assert np.all(a >= 0) and np.all(a_star >= 0)
    assert np.all(a <= C * (1 + 1e-12)) and np.all(a_star <= C * (1 + 1e-12))
    assert np.all(a * a_star == 0)
    np.testing.assert_allclose(m.weights, (a_star - a) @ X, atol=1e-10)
    assert abs(m.dual_coef.sum()) <= 1e-8 * max(1.0, C * n)


def test_predict_and_roundtrip():
    m = SvrModel(np.array([2.0]), 1.0, np.zeros(1), ("x",))
    assert m.predict_array(np.array([[3.0]]))[0] == 7.0
    back = SvrModel.from_dict(m.to_dict())
    assert back.bias == 1.0 and back.weights.tolist() == [2.0]


def test_validation():
    with pytest.raises(ValueError):
        SvrParams(cost=0.0)
    with pytest.raises(ValueError):
        SvrParams(epsilon=-0.1)
    with pytest.raises(NonFiniteInput):
        fit_svr((np.array([[1.0], [np.inf]]), np.array([0.0, 1.0])))
