"""Time the compiled kernels against the numpy fallback and check they agree.

    python benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

import argparse
import time

import numpy as np

from stackcast._kernels import COMPILED_AVAILABLE, get_backend


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(quick):
    rng = np.random.default_rng(0)
    n_tree = 300 if quick else 1000
    X = rng.uniform(size=(n_tree, 12))
    y = 3 * X[:, 0] - 2 * X[:, 1] + rng.normal(0, 0.1, n_tree)
    rows = np.sort(rng.choice(n_tree, n_tree // 2, replace=False))
    yield "build_tree", lambda k: k.build_tree(X, y, rows, 4, 5, -1, 123), lambda a, b: all(
        np.array_equal(u, v) for u, v in zip(a, b))

    n_svr = 120 if quick else 300
    Xs = rng.uniform(size=(n_svr, 5))
    ys = Xs @ rng.normal(size=5) + rng.normal(0, 0.1, n_svr)
    K = Xs @ Xs.T
    yield "svr_smo", lambda k: k.svr_smo(K, ys, 1.0, 0.05, 1e-4, 100 * n_svr), lambda a, b: np.allclose(
        a[0], b[0], atol=1e-9)

    n_en = 300 if quick else 1000
    # strongly correlated columns, like moving averages of one price series
    Xe = rng.normal(size=(n_en, 1)) + 0.1 * rng.normal(size=(n_en, 30))
    ye = Xe[:, :5] @ np.arange(1, 6) + rng.normal(size=n_en)
    Xf = np.asfortranarray(Xe - Xe.mean(0))
    yc = ye - ye.mean()
    xsq = (Xf ** 2).mean(0)
    yield "enet_cd", lambda k: k.enet_cd(Xf, yc, np.zeros(30), 1e-3, 0.5, xsq, 2000, 1e-12), lambda a, b: np.allclose(
        a[0], b[0], atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller problems")
    args = ap.parse_args(argv)
    if not COMPILED_AVAILABLE:
        print("compiled kernels not built; only the fallback can be timed")
    py = get_backend("python")
    cy = get_backend("cython") if COMPILED_AVAILABLE else None
    print(f"{'kernel':<12}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}  agree")
    for name, call, same in cases(args.quick):
        tp, out_p = _best(lambda: call(py), args.repeat)
        if cy is None:
            print(f"{name:<12}{tp:>12.4f}{'-':>12}{'-':>10}  -")
            continue
        tc, out_c = _best(lambda: call(cy), args.repeat)
        print(f"{name:<12}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x  {same(out_p, out_c)}")


if __name__ == "__main__":
    main()
