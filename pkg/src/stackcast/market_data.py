"""Loading, validation, summary statistics and date splitting of daily OHLCV series."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .errors import (
    BoundaryOutOfRange,
    EmptyFile,
    EmptySeries,
    MissingColumn,
    NonMonotonicDates,
    UnparseableRow,
)

PRICE_FIELDS = ("open", "high", "low", "close")
VOLUME_FIELDS = ("volume_from", "volume_to")
FIELDS = PRICE_FIELDS + VOLUME_FIELDS

# field -> default CSV column name (CryptoCompare histoday naming)
DEFAULT_SCHEMA = {
    "date": "time",
    "open": "open",
    "high": "high",
    "low": "low",
    "close": "close",
    "volume_from": "volumefrom",
    "volume_to": "volumeto",
}


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OhlcvSeries:
    """Immutable column store of daily OHLCV rows with strictly increasing dates."""

    dates: np.ndarray
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume_from: np.ndarray
    volume_to: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", _frozen(self.dates, "datetime64[D]"))
        for name in FIELDS:
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))
        n = len(self.dates)
        if n == 0:
            raise EmptySeries("an OHLCV series needs at least one row")
        for name in FIELDS:
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if n > 1 and not np.all(np.diff(self.dates).astype(np.int64) > 0):
            raise NonMonotonicDates("dates must be strictly increasing")
        bad = _invariant_violations(self.open, self.high, self.low, self.close,
                                    self.volume_from, self.volume_to)
        if bad.size:
            i = int(bad[0])
            raise UnparseableRow(i + 1, _describe_violation(self, i))

    def __len__(self):
        return len(self.dates)

    def column(self, name):
        return getattr(self, name)

    def slice(self, start=None, stop=None):
        sl = slice(start, stop)
        return OhlcvSeries(self.dates[sl], *(getattr(self, f)[sl] for f in FIELDS))

    def content_hash(self):
        import hashlib

        h = hashlib.sha256()
        h.update(self.dates.astype("datetime64[D]").astype(np.int64).tobytes())
        for f in FIELDS:
            h.update(np.ascontiguousarray(getattr(self, f)).tobytes())
        return h.hexdigest()


def _invariant_violations(o, h, l, c, vf, vt):
    with np.errstate(invalid="ignore"):
        ok = (
            np.isfinite(o) & np.isfinite(h) & np.isfinite(l) & np.isfinite(c)
            & np.isfinite(vf) & np.isfinite(vt)
            & (o > 0) & (h > 0) & (l > 0) & (c > 0)
            & (l <= np.minimum(o, c)) & (h >= np.maximum(o, c)) & (l <= h)
            & (vf >= 0) & (vt >= 0)
        )
    return np.flatnonzero(~ok)


def _describe_violation(s, i):
    o, h, l, c = s.open[i], s.high[i], s.low[i], s.close[i]
    if min(o, h, l, c) <= 0:
        return "prices must be positive"
    if l > h:
        return f"low {l} exceeds high {h}"
    if l > min(o, c):
        return f"low {l} exceeds min(open, close)"
    if h < max(o, c):
        return f"high {h} is below max(open, close)"
    return "non-finite value or negative volume"


def parse_date(text):
    """Parse an ISO ``YYYY-MM-DD`` date or integer unix seconds."""
    text = text.strip()
    if text.lstrip("-").isdigit():
        return np.datetime64(dt.datetime.fromtimestamp(int(text), dt.timezone.utc).date(), "D")
    return np.datetime64(dt.date.fromisoformat(text[:10]), "D")


def load_csv(path, schema=None) -> OhlcvSeries:
    """Load and validate an OHLCV CSV file.

    ``schema`` maps series fields (``date``, ``open``, ..., ``volume_to``) to
    CSV column names and overrides :data:`DEFAULT_SCHEMA` key by key. Rows are
    numbered from 1 (first data row) in :class:`UnparseableRow` errors. Rows
    arriving out of order are sorted; a repeated date raises
    :class:`NonMonotonicDates`.
    """
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path} is empty") from None
        header = [h.strip() for h in header]
        pos = {}
        for field in ("date",) + FIELDS:
            if cols[field] not in header:
                raise MissingColumn(cols[field])
            pos[field] = header.index(cols[field])

        dates, values = [], {f: [] for f in FIELDS}
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                d = parse_date(row[pos["date"]])
                vals = {f: float(row[pos[f]]) for f in FIELDS}
            except (ValueError, IndexError, OverflowError) as exc:
                raise UnparseableRow(lineno, str(exc)) from None
            bad = _invariant_violations(*(np.array([vals[f]]) for f in FIELDS))
            if bad.size:
                row_ns = SimpleNamespace(**{f: [vals[f]] for f in FIELDS})
                raise UnparseableRow(lineno, _describe_violation(row_ns, 0))
            dates.append(d)
            for f in FIELDS:
                values[f].append(vals[f])

    if not dates:
        raise EmptyFile(f"{path} has a header but no data rows")
    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    if len(dates) > 1 and np.any(np.diff(dates).astype(np.int64) == 0):
        dup = dates[1:][np.diff(dates).astype(np.int64) == 0][0]
        raise NonMonotonicDates(f"duplicate date {dup}")
    return OhlcvSeries(dates, *(np.asarray(values[f])[order] for f in FIELDS))


def save_csv(series: OhlcvSeries, path, schema=None):
    """Write ``series`` with ISO dates; floats use shortest round-trip repr."""
    cols = dict(DEFAULT_SCHEMA)
    if schema:
        cols.update(schema)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([cols["date"]] + [cols[f] for f in FIELDS])
        for i in range(len(series)):
            w.writerow([str(series.dates[i])] + [repr(float(getattr(series, f)[i])) for f in FIELDS])


def _as_day(date):
    if isinstance(date, str):
        return parse_date(date)
    return np.datetime64(date, "D")


def split(series: OhlcvSeries, boundary_date):
    """Partition ``series`` into rows on/before ``boundary_date`` and rows after it.

    The boundary is the last training day. Both halves must be non-empty.
    """
    b = _as_day(boundary_date)
    if not (series.dates[0] <= b < series.dates[-1]):
        raise BoundaryOutOfRange(
            f"boundary {b} must satisfy {series.dates[0]} <= boundary < {series.dates[-1]}"
        )
    cut = int(np.searchsorted(series.dates, b, side="right"))
    return series.slice(None, cut), series.slice(cut, None)


@dataclass(frozen=True)
class ColumnStats:
    min: float
    max: float
    mean: float
    std: float


def describe(series: OhlcvSeries) -> dict:
    """Per-column min/max/mean and sample standard deviation (N-1 denominator)."""
    if series is None or len(series) == 0:
        raise EmptySeries("cannot describe an empty series")
    out = {}
    for f in ("close", "high", "low", "open") + VOLUME_FIELDS:
        x = getattr(series, f)
        mean = float(np.mean(x))
        # clamp: summation rounding can put the mean one ulp outside [min, max]
        mean = min(max(mean, float(x.min())), float(x.max()))
        std = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
        out[f] = ColumnStats(float(x.min()), float(x.max()), mean, std)
    return out
