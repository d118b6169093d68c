import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stackcast.errors import ColumnMismatch, EmptyMatrix
from stackcast.indicators import FeatureMatrix
from stackcast.preprocess import ScalerState, fit_scaler, inverse_transform, transform


def fm(X, y=None, names=None):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    y = np.arange(len(X), dtype=float) + 1 if y is None else np.asarray(y, float)
    names = names or tuple(f"c{i}" for i in range(X.shape[1]))
    return FeatureMatrix(names, X, y, np.datetime64("2018-01-01") + np.arange(len(X)))


def test_fit_examples():
    s = fit_scaler(fm([[2.0], [4.0], [6.0]]))
    assert s.minimum[0] == 2 and s.maximum[0] == 6
    assert fit_scaler(fm([[3.0], [3.0]])).degenerate == ("c0",)
    s = fit_scaler(fm([[1.0, 10.0], [3.0, 30.0], [2.0, -5.0]], y=[7, 8, 9]))
    assert s.minimum.tolist() == [1, -5, 7] and s.maximum.tolist() == [3, 30, 9]
    with pytest.raises(EmptyMatrix):
        fit_scaler(FeatureMatrix(("a",), np.empty((0, 1)), np.empty(0), np.empty(0, "datetime64[D]")))


def test_transform_examples():
    s = fit_scaler(fm([[2.0], [6.0]]))
    out = transform(s, fm([[2.0], [6.0], [4.0], [8.0]]))
    assert out.X[:, 0].tolist() == [0.0, 1.0, 0.5, 1.5]
    assert transform(fit_scaler(fm([[3.0], [3.0]])), fm([[3.0], [9.0]])).X[:, 0].tolist() == [0.0, 0.0]
    with pytest.raises(ColumnMismatch):
        transform(s, fm([[1.0]], names=("other",)))


def test_inverse_examples():
    s = ScalerState(("c0", "target"), [2.0, 0.0], [6.0, 1.0])
    back = inverse_transform(s, fm([[0.0], [1.0], [0.5]], y=[0, 0, 0]))
    assert back.X[:, 0].tolist() == [2.0, 6.0, 4.0]
    assert s.unscale_target(0.5) == 0.5


@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 5)),
              elements=st.floats(-1e6, 1e6, allow_nan=False)))
@settings(max_examples=80, deadline=None)
def test_roundtrip_and_range(X):
    m = fm(X, y=X[:, 0] * 2 + 1)
    s = fit_scaler(m)
    t = transform(s, m)
    assert np.all(t.X >= 0) and np.all(t.X <= 1 + 1e-12)
    back = inverse_transform(s, t)
    span = np.maximum(np.abs(X).max(0), 1.0)
    live = s.maximum[:-1] > s.minimum[:-1]
    assert np.all(np.abs(back.X - X)[:, live] <= 1e-9 * span[live])


def test_identity_and_io(tmp_path):
    s = ScalerState.identity_for(("a", "b"))
    m = fm([[5.0, -1.0]], names=("a", "b"))
    assert np.array_equal(transform(s, m).X, m.X)
    s = fit_scaler(fm(np.random.default_rng(0).normal(size=(10, 3))))
    s.save(tmp_path / "s.json")
    t = ScalerState.load(tmp_path / "s.json")
    assert t.names == s.names and np.array_equal(t.minimum, s.minimum) and not t.identity
