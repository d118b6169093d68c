"""Forecast accuracy metrics, residual series and model comparison tables."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConstantActualForR2, LengthMismatch, ZeroActualForMape

METRICS = ("mape", "rmse", "mae", "r_squared")
HIGHER_IS_BETTER = {"r_squared"}
LABELS = {"mape": "MAPE (%)", "rmse": "RMSE (USD)", "mae": "MAE (USD)", "r_squared": "R-Squared"}


@dataclass(frozen=True)
class MetricsReport:
    mape: float
    rmse: float
    mae: float
    r_squared: float
    slice: str = "test"
    model_name: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _pair(actual, forecast):
    a = np.asarray(actual, dtype=np.float64).ravel()
    f = np.asarray(forecast, dtype=np.float64).ravel()
    if a.shape != f.shape:
        raise LengthMismatch(f"actual has {a.size} values, forecast has {f.size}")
    if a.size == 0:
        raise LengthMismatch("need at least one value")
    return a, f


def rmse(actual, forecast):
    a, f = _pair(actual, forecast)
    return float(np.sqrt(np.mean((a - f) ** 2)))


def mae(actual, forecast):
    a, f = _pair(actual, forecast)
    return float(np.mean(np.abs(a - f)))


def mape(actual, forecast):
    """Mean absolute percentage error, in percent."""
    a, f = _pair(actual, forecast)
    if np.any(a == 0):
        raise ZeroActualForMape("MAPE is undefined when an actual value is zero")
    return float(np.mean(np.abs(a - f) / np.abs(a)) * 100.0)


def r_squared(actual, forecast):
    """1 - SSE/SST with the mean of the evaluated actuals."""
    a, f = _pair(actual, forecast)
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst == 0:
        raise ConstantActualForR2("R-squared is undefined for constant actual values")
    return 1.0 - float(np.sum((a - f) ** 2)) / sst


def compute_metrics(actual, forecast, slice="test", model_name="") -> MetricsReport:
    a, f = _pair(actual, forecast)
    return MetricsReport(mape(a, f), rmse(a, f), mae(a, f), r_squared(a, f), slice, model_name)


@dataclass(frozen=True)
class ErrorSeries:
    dates: np.ndarray
    residuals: np.ndarray  # actual - forecast; positive means under-forecast

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "residual"])
            for d, r in zip(self.dates, self.residuals):
                w.writerow([str(d), repr(float(r))])


def error_series(actual, forecast, dates) -> ErrorSeries:
    a, f = _pair(actual, forecast)
    dates = np.asarray(dates)
    if len(dates) != a.size:
        raise LengthMismatch(f"{len(dates)} dates for {a.size} values")
    return ErrorSeries(dates, a - f)


def best_flags(reports):
    """``{(model_name, slice, metric): True}`` for the best value in each (metric, slice) column."""
    flags = {}
    for sl in sorted({r.slice for r in reports}):
        group = [r for r in reports if r.slice == sl]
        for metric in METRICS:
            vals = [getattr(r, metric) for r in group]
            best = max(vals) if metric in HIGHER_IS_BETTER else min(vals)
            for r, v in zip(group, vals):
                flags[(r.model_name, sl, metric)] = v == best
    return flags


def comparison_table(reports, slices=("test", "train"), digits=4) -> str:
    """Markdown table: one row per model, metric x slice columns, best values in bold."""
    if not reports:
        return ""
    flags = best_flags(reports)
    models = list(dict.fromkeys(r.model_name for r in reports))
    present = [s for s in slices if any(r.slice == s for r in reports)]
    by_key = {(r.model_name, r.slice): r for r in reports}
    header = ["Model"] + [f"{LABELS[m]} {s}" for m in METRICS for s in present]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for name in models:
        cells = [name]
        for metric in METRICS:
            for sl in present:
                r = by_key.get((name, sl))
                if r is None:
                    cells.append("")
                    continue
                txt = f"{getattr(r, metric):.{digits}f}"
                cells.append(f"**{txt}**" if flags[(name, sl, metric)] else txt)
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def save_metrics(reports, path):
    Path(path).write_text(json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n")


def load_metrics(path):
    return [MetricsReport.from_dict(d) for d in json.loads(Path(path).read_text())]
