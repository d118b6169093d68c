"""Regenerate the bundled 600-row OHLCV fixture (geometric Brownian motion, fixed seed)."""

import argparse
from pathlib import Path

import numpy as np

from stackcast.market_data import OhlcvSeries, save_csv

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "stackcast" / "data" / "fixture_600.csv"


def make_series(n=600, seed=20190816, start="2017-01-01", s0=1000.0, mu=0.002, sigma=0.04):
    rng = np.random.default_rng(seed)
    close = s0 * np.exp(np.cumsum((mu - 0.5 * sigma ** 2) + sigma * rng.standard_normal(n)))
    open_ = np.concatenate([[s0], close[:-1]]) * np.exp(0.002 * rng.standard_normal(n))
    top = np.maximum(open_, close)
    bottom = np.minimum(open_, close)
    high = top * (1 + np.abs(rng.normal(0, 0.015, n)))
    low = bottom * (1 - np.abs(rng.normal(0, 0.015, n)))
    vol_from = rng.lognormal(11, 0.4, n)
    vol_to = vol_from * (high + low) / 2 * np.exp(0.05 * rng.standard_normal(n))
    dates = np.datetime64(start, "D") + np.arange(n)
    r = lambda a: np.round(a, 2)  # noqa: E731
    return OhlcvSeries(dates, r(open_), r(np.maximum(high, top)), r(np.minimum(low, bottom)), r(close),
                       r(vol_from), r(vol_to))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=600)
    ap.add_argument("--seed", type=int, default=20190816)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)
    series = make_series(args.rows, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(series, args.out)
    print(f"wrote {len(series)} rows to {args.out}")


if __name__ == "__main__":
    main()
