"""The compiled kernels and the numpy fallback must agree."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackcast import _kernels
from stackcast._kernels import COMPILED_AVAILABLE, get_backend

needs_compiled = pytest.mark.skipif(not COMPILED_AVAILABLE, reason="compiled kernels not built")


def test_backend_selection():
    assert _kernels.BACKEND in ("python", "cython")
    assert get_backend("python") is _kernels._fallback
    with pytest.raises(ValueError):
        get_backend("fortran")


@needs_compiled
@given(seed=st.integers(0, 2**20), n=st.integers(5, 80), k=st.integers(1, 6), min_leaf=st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_tree_identical(seed, n, k, min_leaf):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, k)), 1)  # ties exercise the threshold rule
    y = rng.normal(size=n)
    rows = np.sort(rng.choice(n, max(1, n // 2), replace=False))
    mtry = int(rng.integers(1, k + 1))
    a = get_backend("python").build_tree(X, y, rows, mtry, min_leaf, -1, seed)
    b = get_backend("cython").build_tree(X, y, rows, mtry, min_leaf, -1, seed)
    for u, v in zip(a, b):
        assert np.array_equal(np.asarray(u), np.asarray(v))
    Z = rng.normal(size=(10, k))
    assert np.array_equal(get_backend("python").predict_tree(*a[:5], Z),
                          get_backend("cython").predict_tree(*a[:5], Z))


@needs_compiled
@given(seed=st.integers(0, 2**20), n=st.integers(2, 40))
@settings(max_examples=30, deadline=None)
def test_svr_agree(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = X @ rng.normal(size=3) + rng.normal(0, 0.3, n)
    K = X @ X.T
    a = get_backend("python").svr_smo(K, y, 1.0, 0.1, 1e-8, 100_000)
    b = get_backend("cython").svr_smo(K, y, 1.0, 0.1, 1e-8, 100_000)
    np.testing.assert_allclose(a[0], b[0], atol=1e-9)
    assert abs(a[1] - b[1]) < 1e-9


@needs_compiled
@given(seed=st.integers(0, 2**20), gamma=st.floats(0, 1), lam=st.floats(1e-4, 1.0))
@settings(max_examples=30, deadline=None)
def test_enet_agree(seed, gamma, lam):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 6))
    X = np.asfortranarray(X - X.mean(0))
    y = X[:, 0] - 2 * X[:, 1] + rng.normal(size=40)
    y = y - y.mean()
    xsq = (X ** 2).mean(0)
    a = get_backend("python").enet_cd(X, y, np.zeros(6), lam, gamma, xsq, 5000, 1e-20)
    b = get_backend("cython").enet_cd(X, y, np.zeros(6), lam, gamma, xsq, 5000, 1e-20)
    np.testing.assert_allclose(a[0], b[0], atol=1e-10)
