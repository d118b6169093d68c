"""Rolling-window technical indicators and feature-matrix assembly.

Every indicator returns an array aligned with its input, with ``nan`` at the
warm-up positions where the window is not yet full.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DuplicateColumnName, SeriesTooShort, WindowTooLarge
from .market_data import OhlcvSeries

CCI_CONSTANT = 0.015


def _as_float(x):
    return np.asarray(x, dtype=np.float64)


def _check_window(n, w, need=None):
    if w < 1:
        raise ValueError(f"window must be >= 1, got {w}")
    need = w if need is None else need
    if n < need:
        raise WindowTooLarge(f"window {w} needs at least {need} observations, got {n}")


def _windows(x, w):
    return sliding_window_view(x, w)


def _pad(values, n):
    out = np.full(n, np.nan)
    out[n - len(values):] = values
    return out


def sma(close, w):
    """Arithmetic mean of the last ``w`` closes."""
    c = _as_float(close)
    _check_window(len(c), w)
    return _pad(_windows(c, w).mean(axis=1), len(c))


def ema(close, w):
    """Recursive exponential average, alpha = 2/(w+1), seeded with the SMA of the first w points."""
    c = _as_float(close)
    _check_window(len(c), w)
    alpha = 2.0 / (w + 1.0)
    out = np.full(len(c), np.nan)
    prev = float(np.mean(c[:w]))
    out[w - 1] = prev
    for d in range(w, len(c)):
        prev = alpha * c[d] + (1.0 - alpha) * prev
        out[d] = prev
    return out


def wma(close, w):
    """Linearly weighted average: weight w on the latest close down to 1 on the oldest."""
    c = _as_float(close)
    _check_window(len(c), w)
    weights = np.arange(1, w + 1, dtype=np.float64)
    vals = (_windows(c, w) * weights).sum(axis=1) / (w * (w + 1) / 2.0)
    return _pad(vals, len(c))


def true_range(high, low, close):
    h, l, c = _as_float(high), _as_float(low), _as_float(close)
    tr = np.full(len(c), np.nan)
    prev = c[:-1]
    tr[1:] = np.maximum.reduce([h[1:] - l[1:], np.abs(h[1:] - prev), np.abs(l[1:] - prev)])
    return tr


def atr(high, low, close, w):
    """EMA over ``w`` days of the true range; the first value lands at index ``w``."""
    c = _as_float(close)
    _check_window(len(c), w, need=w + 1)
    tr = true_range(high, low, close)
    out = np.full(len(c), np.nan)
    out[1:] = ema(tr[1:], w)
    return out


def ad_line(high, low, close, volume):
    """Chaikin accumulation/distribution line (running sum of money-flow volume).

    Days with ``high == low`` contribute nothing.
    """
    h, l, c, v = _as_float(high), _as_float(low), _as_float(close), _as_float(volume)
    rng = h - l
    mult = np.zeros(len(c))
    ok = rng != 0
    mult[ok] = ((c[ok] - l[ok]) - (h[ok] - c[ok])) / rng[ok]
    return np.cumsum(mult * v)


def cci(high, low, close, w):
    """Commodity channel index on the summed price H+L+C.

    A window with (numerically) zero mean absolute deviation yields 0.
    """
    s = _as_float(high) + _as_float(low) + _as_float(close)
    _check_window(len(s), w)
    win = _windows(s, w)
    mean = win.mean(axis=1)
    mad = np.abs(win - mean[:, None]).mean(axis=1)
    last = win[:, -1]
    degenerate = mad <= 1e-12 * np.maximum(np.abs(mean), np.finfo(float).tiny)
    vals = np.zeros(len(mean))
    ok = ~degenerate
    vals[ok] = (last[ok] - mean[ok]) / (CCI_CONSTANT * mad[ok])
    return _pad(vals, len(s))


def roc(close, w):
    """(C_d - C_{d-w}) / C_{d-w}."""
    c = _as_float(close)
    _check_window(len(c), w, need=w + 1)
    out = np.full(len(c), np.nan)
    out[w:] = (c[w:] - c[:-w]) / c[:-w]
    return out


def mom(close, w):
    """C_d - C_{d-w}."""
    c = _as_float(close)
    _check_window(len(c), w, need=w + 1)
    out = np.full(len(c), np.nan)
    out[w:] = c[w:] - c[:-w]
    return out


def macd(close, fast=12, slow=26, signal=9):
    """Return ``(line, signal_line, histogram)``."""
    if not fast < slow:
        raise ValueError(f"MACD fast period {fast} must be below slow period {slow}")
    c = _as_float(close)
    _check_window(len(c), slow, need=slow + signal - 1)
    line = ema(c, fast) - ema(c, slow)
    sig = np.full(len(c), np.nan)
    sig[slow - 1:] = ema(line[slow - 1:], signal)
    return line, sig, line - sig


def bollinger(close, w, k=2.0):
    """Return ``(mid, up, down)``: SMA plus/minus ``k`` population standard deviations."""
    c = _as_float(close)
    _check_window(len(c), w)
    win = _windows(c, w)
    mid = win.mean(axis=1)
    std = np.sqrt(((win - mid[:, None]) ** 2).mean(axis=1))
    n = len(c)
    return _pad(mid, n), _pad(mid + k * std, n), _pad(mid - k * std, n)


def stoch_osc(high, low, close, w):
    """Position of the close inside the w-day low/high range; a flat range yields 0.5."""
    h, l, c = _as_float(high), _as_float(low), _as_float(close)
    _check_window(len(c), w)
    hh = _windows(h, w).max(axis=1)
    ll = _windows(l, w).min(axis=1)
    cc = c[w - 1:]
    span = hh - ll
    vals = np.full(len(cc), 0.5)
    ok = span > 0
    vals[ok] = (cc[ok] - ll[ok]) / span[ok]
    return _pad(vals, len(c))


def log_returns(close):
    c = _as_float(close)
    out = np.full(len(c), np.nan)
    out[1:] = np.log(c[1:] / c[:-1])
    return out


def rolling_stat(close, w, stat):
    """Rolling ``"mean"``, ``"median"`` or ``"volatility"`` of the close.

    Volatility is the sample standard deviation of the last ``w`` daily log
    returns, so it first appears at index ``w`` and needs ``w >= 2``.
    """
    c = _as_float(close)
    if stat == "mean":
        _check_window(len(c), w)
        return _pad(_windows(c, w).mean(axis=1), len(c))
    if stat == "median":
        _check_window(len(c), w)
        return _pad(np.median(_windows(c, w), axis=1), len(c))
    if stat == "volatility":
        if w < 2:
            raise ValueError("volatility needs a window of at least 2 returns")
        _check_window(len(c), w, need=w + 1)
        r = log_returns(c)[1:]
        return _pad(_windows(r, w).std(axis=1, ddof=1), len(c))
    raise ValueError(f"unknown rolling statistic {stat!r}")


class Kind(str, Enum):
    OPEN = "OPEN"
    HIGH = "HIGH"
    LOW = "LOW"
    CLOSE = "CLOSE"
    VOLUME_FROM = "VOLUME_FROM"
    VOLUME_TO = "VOLUME_TO"
    SMA = "SMA"
    EMA = "EMA"
    WMA = "WMA"
    ATR = "ATR"
    AD = "AD"
    CCI = "CCI"
    ROC = "ROC"
    MOM = "MOM"
    MACD_LINE = "MACD_LINE"
    MACD_SIGNAL = "MACD_SIGNAL"
    MACD_HIST = "MACD_HIST"
    BBANDS_MID = "BBANDS_MID"
    BBANDS_UP = "BBANDS_UP"
    BBANDS_DOWN = "BBANDS_DOWN"
    STOCH_OSC = "STOCH_OSC"
    ROLLING_MEAN = "ROLLING_MEAN"
    ROLLING_MEDIAN = "ROLLING_MEDIAN"
    VOLATILITY = "VOLATILITY"


RAW_KINDS = {
    Kind.OPEN: ("open", "Open"),
    Kind.HIGH: ("high", "High"),
    Kind.LOW: ("low", "Low"),
    Kind.CLOSE: ("close", "Close"),
    Kind.VOLUME_FROM: ("volume_from", "volumeF"),
    Kind.VOLUME_TO: ("volume_to", "volume"),
}

_NAME_TEMPLATES = {
    Kind.SMA: "SMA{w}",
    Kind.EMA: "EMA{w}",
    Kind.WMA: "WMA{w}",
    Kind.ATR: "atr",
    Kind.AD: "ad",
    Kind.CCI: "cci",
    Kind.ROC: "roc",
    Kind.MOM: "mom",
    Kind.MACD_LINE: "MACDLine",
    Kind.MACD_SIGNAL: "MACDSignalLine",
    Kind.MACD_HIST: "MACDHistogram",
    Kind.BBANDS_MID: "SMABollBands{w}",
    Kind.BBANDS_UP: "BBands{w}Up",
    Kind.BBANDS_DOWN: "BBands{w}Down",
    Kind.STOCH_OSC: "stochOSC",
    Kind.ROLLING_MEAN: "meanMW",
    Kind.ROLLING_MEDIAN: "medianMW",
    Kind.VOLATILITY: "Volatility",
}

_DEFAULT_WINDOWS = {
    Kind.ATR: 14,
    Kind.CCI: 20,
    Kind.ROC: 10,
    Kind.MOM: 10,
    Kind.STOCH_OSC: 14,
    Kind.ROLLING_MEAN: 20,
    Kind.ROLLING_MEDIAN: 20,
    Kind.VOLATILITY: 20,
    Kind.MACD_LINE: 26,
    Kind.MACD_SIGNAL: 26,
    Kind.MACD_HIST: 26,
}


@dataclass(frozen=True)
class IndicatorSpec:
    """One feature column. ``aux`` carries ``k`` for Bollinger bands and
    ``fast``/``slow``/``signal`` for MACD."""

    kind: Kind
    window: int = 1
    aux: dict = field(default_factory=dict, hash=False, compare=True)
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        if self.kind in (Kind.MACD_LINE, Kind.MACD_SIGNAL, Kind.MACD_HIST):
            fast = self.aux.get("fast", 12)
            slow = self.aux.get("slow", 26)
            if not fast < slow:
                raise ValueError(f"MACD fast period {fast} must be below slow period {slow}")
        if self.name is None:
            if self.kind in RAW_KINDS:
                name = RAW_KINDS[self.kind][1]
            else:
                name = _NAME_TEMPLATES[self.kind].format(w=self.window)
            object.__setattr__(self, "name", name)

    def to_dict(self):
        return {"kind": self.kind.value, "window": self.window, "aux": dict(self.aux), "name": self.name}

    @classmethod
    def from_dict(cls, d):
        kind = Kind(d["kind"])
        window = d.get("window", _DEFAULT_WINDOWS.get(kind, 1))
        return cls(kind, int(window), dict(d.get("aux", {})), d.get("name"))


def spec(kind, window=None, name=None, **aux):
    kind = Kind(kind)
    if window is None:
        window = _DEFAULT_WINDOWS.get(kind, 1)
    return IndicatorSpec(kind, int(window), aux, name)


def compute(series: OhlcvSeries, s: IndicatorSpec):
    """Compute one indicator column over the full series."""
    k = s.kind
    o, h, l, c = series.open, series.high, series.low, series.close
    w = s.window
    if k in RAW_KINDS:
        return np.array(getattr(series, RAW_KINDS[k][0]), dtype=np.float64)
    if k is Kind.SMA:
        return sma(c, w)
    if k is Kind.EMA:
        return ema(c, w)
    if k is Kind.WMA:
        return wma(c, w)
    if k is Kind.ATR:
        return atr(h, l, c, w)
    if k is Kind.AD:
        return ad_line(h, l, c, series.volume_from)
    if k is Kind.CCI:
        return cci(h, l, c, w)
    if k is Kind.ROC:
        return roc(c, w)
    if k is Kind.MOM:
        return mom(c, w)
    if k in (Kind.MACD_LINE, Kind.MACD_SIGNAL, Kind.MACD_HIST):
        parts = macd(c, s.aux.get("fast", 12), s.aux.get("slow", 26), s.aux.get("signal", 9))
        return parts[(Kind.MACD_LINE, Kind.MACD_SIGNAL, Kind.MACD_HIST).index(k)]
    if k in (Kind.BBANDS_MID, Kind.BBANDS_UP, Kind.BBANDS_DOWN):
        parts = bollinger(c, w, s.aux.get("k", 2.0))
        return parts[(Kind.BBANDS_MID, Kind.BBANDS_UP, Kind.BBANDS_DOWN).index(k)]
    if k is Kind.STOCH_OSC:
        return stoch_osc(h, l, c, w)
    if k is Kind.ROLLING_MEAN:
        return rolling_stat(c, w, "mean")
    if k is Kind.ROLLING_MEDIAN:
        return rolling_stat(c, w, "median")
    if k is Kind.VOLATILITY:
        return rolling_stat(c, w, "volatility")
    raise ValueError(f"unsupported indicator kind {k}")


def warmup(s: IndicatorSpec) -> int:
    """Number of leading rows for which the indicator is undefined."""
    k, w = s.kind, s.window
    if k in RAW_KINDS or k is Kind.AD:
        return 0
    if k in (Kind.ATR, Kind.ROC, Kind.MOM, Kind.VOLATILITY):
        return w
    if k in (Kind.MACD_LINE, Kind.MACD_SIGNAL, Kind.MACD_HIST):
        slow = s.aux.get("slow", 26)
        if k is Kind.MACD_LINE:
            return slow - 1
        return slow - 1 + s.aux.get("signal", 9) - 1
    return w - 1


# the 34 columns kept by feature selection on the daily BTC series
SELECTED_FEATURES = (
    [spec("OPEN"), spec("HIGH"), spec("LOW")]
    + [spec("SMA", w) for w in (5, 13, 20, 30, 50)]
    + [spec("EMA", w) for w in (5, 12, 26, 50)]
    + [spec("WMA", w) for w in (5, 50)]
    + [spec("MACD_LINE"), spec("MACD_SIGNAL"), spec("MACD_HIST")]
    + [spec(kind, w) for w in (5, 13, 20) for kind in ("BBANDS_MID", "BBANDS_UP", "BBANDS_DOWN")]
    + [spec("STOCH_OSC"), spec("CCI"), spec("AD"), spec("ROC"), spec("MOM")]
    + [spec("ROLLING_MEAN"), spec("ROLLING_MEDIAN"), spec("VOLATILITY")]
)

# candidates fed to feature selection: the 34 above plus ATR and both volumes
CANDIDATE_FEATURES = SELECTED_FEATURES + [spec("ATR"), spec("VOLUME_TO"), spec("VOLUME_FROM")]

RAW_FEATURES = [spec(k) for k in ("OPEN", "HIGH", "LOW", "CLOSE", "VOLUME_FROM", "VOLUME_TO")]


@dataclass(frozen=True)
class FeatureMatrix:
    """Date-aligned feature columns plus the regression target."""

    column_names: tuple
    X: np.ndarray
    target: np.ndarray
    dates: np.ndarray

    def __post_init__(self):
        names = tuple(self.column_names)
        object.__setattr__(self, "column_names", names)
        X = np.array(self.X, dtype=np.float64).reshape(len(self.target), len(names))
        X.setflags(write=False)
        y = np.array(self.target, dtype=np.float64)
        y.setflags(write=False)
        d = np.array(self.dates, dtype="datetime64[D]")
        d.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "dates", d)
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateColumnName(f"duplicate column names: {dup}")
        if not (X.shape[0] == len(y) == len(d)):
            raise ValueError("feature rows, target and dates must have equal length")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("feature matrix contains non-finite values")

    def __len__(self):
        return len(self.target)

    @property
    def n_features(self):
        return len(self.column_names)

    def rows(self, index):
        return FeatureMatrix(self.column_names, self.X[index], self.target[index], self.dates[index])

    def select(self, columns):
        """Return a matrix restricted to (and ordered by) ``columns``."""
        from .errors import ColumnMismatch

        missing = [c for c in columns if c not in self.column_names]
        if missing:
            raise ColumnMismatch(f"columns not present: {missing}")
        idx = [self.column_names.index(c) for c in columns]
        return FeatureMatrix(tuple(columns), self.X[:, idx], self.target, self.dates)

    def with_values(self, X=None, target=None):
        return FeatureMatrix(self.column_names, self.X if X is None else X,
                             self.target if target is None else target, self.dates)

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.column_names, "target"])
            for i in range(len(self)):
                w.writerow([str(self.dates[i]), *map(repr, self.X[i].tolist()), repr(float(self.target[i]))])

    @classmethod
    def from_csv(cls, path):
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "date" or header[-1] != "target":
                raise ValueError(f"{path}: header must be date,<features...>,target")
            rows = [r for r in reader if r]
        names = tuple(header[1:-1])
        dates = np.array([r[0] for r in rows], dtype="datetime64[D]")
        vals = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(names) + 1)
        return cls(names, vals[:, :-1], vals[:, -1], dates)

    def save_npz(self, path):
        np.savez(path, X=self.X, target=self.target, dates=self.dates.astype(np.int64),
                 names=np.array(self.column_names, dtype=str))

    @classmethod
    def load_npz(cls, path):
        with np.load(path) as z:
            return cls(tuple(z["names"].tolist()), z["X"], z["target"],
                       z["dates"].astype("datetime64[D]"))


def build_feature_matrix(series: OhlcvSeries, specs, horizon=0) -> FeatureMatrix:
    """Compute ``specs`` on ``series`` and drop warm-up rows.

    The target for the row dated d is the close ``horizon`` rows later
    (``horizon=0``: same-day close). An empty ``specs`` means the raw
    OHLCV columns.
    """
    specs = list(specs) if specs else list(RAW_FEATURES)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise DuplicateColumnName(f"duplicate column names: {dup}")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    n = len(series)
    first = max((warmup(s) for s in specs), default=0)
    if n - horizon - first < 1:
        raise SeriesTooShort(
            f"{n} rows leave no usable rows after {first} warm-up rows and horizon {horizon}"
        )
    try:
        cols = [compute(series, s) for s in specs]
    except WindowTooLarge as exc:
        raise SeriesTooShort(str(exc)) from None
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    last = n - horizon
    X = X[:last]
    target = np.asarray(series.close, dtype=np.float64)[horizon:]
    dates = series.dates[:last]
    keep = np.all(np.isfinite(X), axis=1)
    return FeatureMatrix(tuple(names), X[keep], target[keep], dates[keep])


def cache_key(series: OhlcvSeries, specs, horizon=0):
    payload = json.dumps({"specs": [s.to_dict() for s in specs], "horizon": horizon}, sort_keys=True)
    h = hashlib.sha256()
    h.update(series.content_hash().encode())
    h.update(payload.encode())
    return h.hexdigest()[:16]


def cached_feature_matrix(series, specs, horizon=0, cache_dir=None):
    """:func:`build_feature_matrix` backed by an ``.npz`` cache keyed on content."""
    if cache_dir is None:
        return build_feature_matrix(series, specs, horizon)
    cache_dir = Path(cache_dir)
    path = cache_dir / f"features-{cache_key(series, list(specs) or RAW_FEATURES, horizon)}.npz"
    if path.exists():
        return FeatureMatrix.load_npz(path)
    fm = build_feature_matrix(series, specs, horizon)
    cache_dir.mkdir(parents=True, exist_ok=True)
    fm.save_npz(path)
    return fm
