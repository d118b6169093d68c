"""All-relevant feature selection with shadow probes (Boruta).

Each run appends a row-permuted copy of every still-active feature, fits a
forest on real plus shadow columns, and counts a hit for each real feature
whose importance beats the best shadow. Binomial tests on the accumulated
hits, Bonferroni-corrected over the undecided features, confirm or reject.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.stats import binom

from .errors import TooFewFeatures, TooFewRows
from .learners import ForestParams, fit_forest, permutation_importance
from .learners._common import check_finite, unpack

log = logging.getLogger(__name__)

MIN_ROWS = 20
MIN_SHADOWS = 5


class Decision(str, Enum):
    CONFIRMED = "Confirmed"
    TENTATIVE = "Tentative"
    REJECTED = "Rejected"


_UNDECIDED, _CONFIRMED, _REJECTED = 0, 1, 2
_DECISIONS = (Decision.TENTATIVE, Decision.CONFIRMED, Decision.REJECTED)


def _boruta_forest():
    return ForestParams(ntree=100, bag_fraction=0.632, min_node_size=5)


@dataclass(frozen=True)
class BorutaConfig:
    max_runs: int = 99
    p_value: float = 0.01
    forest_params: ForestParams = field(default_factory=_boruta_forest)
    rng_seed: int = 0
    importance: str = "impurity"  # or "permutation"

    def __post_init__(self):
        if not 0 < self.p_value < 1:
            raise ValueError(f"p_value must lie in (0, 1), got {self.p_value}")
        if self.max_runs < 1:
            raise ValueError("max_runs must be >= 1")
        if self.importance not in ("impurity", "permutation"):
            raise ValueError(f"unknown importance measure {self.importance!r}")

    def to_dict(self):
        return {"max_runs": self.max_runs, "p_value": self.p_value, "rng_seed": self.rng_seed,
                "importance": self.importance, "forest_params": self.forest_params.to_dict()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "forest_params" in d:
            d["forest_params"] = ForestParams.from_dict(d["forest_params"])
        return cls(**d)


@dataclass(frozen=True)
class FeatureVerdict:
    feature_name: str
    decision: Decision
    mean_importance: float
    hit_count: int
    runs: int = 0  # runs the feature took part in


@dataclass
class BorutaResult:
    verdicts: list
    runs: int
    # one dict per run: feature name -> importance, plus shadowMin/shadowMean/shadowMax
    history: list = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter(self.verdicts)

    def __len__(self):
        return len(self.verdicts)

    def selected(self, include_tentative=True):
        keep = {Decision.CONFIRMED, Decision.TENTATIVE} if include_tentative else {Decision.CONFIRMED}
        return [v.feature_name for v in self.verdicts if v.decision in keep]


def _importance(X, y, fp, cfg, seed):
    model = fit_forest((X, y), replace(fp, rng_seed=seed))
    if cfg.importance == "permutation":
        return permutation_importance(model, X, y, seed=seed)
    return model.importance


def _test(hits, runs, n_undecided, p_value):
    """(confirm, reject) masks from two one-sided binomial tests at p = 0.5."""
    alpha = p_value / max(n_undecided, 1)
    confirm = binom.sf(hits - 1, runs, 0.5) < alpha
    reject = binom.cdf(hits, runs, 0.5) < alpha
    return confirm, reject


def run_boruta(m, cfg: BorutaConfig = BorutaConfig()) -> BorutaResult:
    X, y, columns = unpack(m)
    check_finite(X, y)
    n, k = X.shape
    if k < 1:
        raise TooFewFeatures("Boruta needs at least one feature")
    if n < MIN_ROWS:
        raise TooFewRows(f"Boruta needs at least {MIN_ROWS} rows, got {n}")

    status = np.full(k, _UNDECIDED)
    hits = np.zeros(k, dtype=np.int64)
    runs_in = np.zeros(k, dtype=np.int64)
    imp_sum = np.zeros(k)
    history = []
    streams = np.random.SeedSequence(cfg.rng_seed).spawn(cfg.max_runs)
    runs = 0
    for run in range(cfg.max_runs):
        active = np.flatnonzero(status != _REJECTED)
        undecided = np.flatnonzero(status == _UNDECIDED)
        if undecided.size == 0:
            break
        g = np.random.default_rng(streams[run])
        src = active
        while src.size < MIN_SHADOWS:
            src = np.concatenate([src, active])
        shadows = np.column_stack([X[g.permutation(n), j] for j in src])
        Xr = np.ascontiguousarray(np.hstack([X[:, active], shadows]))
        imp = _importance(Xr, y, cfg.forest_params, cfg, int(g.integers(0, 2 ** 63 - 1)))
        real, shadow = imp[: active.size], imp[active.size:]
        shadow_max = float(shadow.max())
        hits[active] += real > shadow_max
        runs_in[active] += 1
        imp_sum[active] += real
        runs += 1
        rec = {columns[j]: float(v) for j, v in zip(active, real)}
        rec.update(shadowMin=float(shadow.min()), shadowMean=float(shadow.mean()), shadowMax=shadow_max)
        history.append(rec)

        # every undecided feature has been in all runs so far
        confirm, reject = _test(hits[undecided], runs, undecided.size, cfg.p_value)
        status[undecided[confirm]] = _CONFIRMED
        status[undecided[reject & ~confirm]] = _REJECTED
        log.debug("boruta run %d: %d confirmed, %d rejected, %d undecided", runs,
                  int(np.sum(status == _CONFIRMED)), int(np.sum(status == _REJECTED)),
                  int(np.sum(status == _UNDECIDED)))

    with np.errstate(invalid="ignore", divide="ignore"):
        mean_imp = np.where(runs_in > 0, imp_sum / np.maximum(runs_in, 1), 0.0)
    verdicts = [FeatureVerdict(columns[j], _DECISIONS[status[j]], float(mean_imp[j]), int(hits[j]), int(runs_in[j]))
                for j in range(k)]
    return BorutaResult(verdicts, runs, history)


def importance_report(verdicts):
    """Verdicts ranked by mean importance, descending (stable on ties)."""
    return sorted(verdicts, key=lambda v: -v.mean_importance)


def write_report(verdicts, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "decision", "mean_importance", "hit_count"])
        for v in importance_report(verdicts):
            w.writerow([v.feature_name, v.decision.value, repr(v.mean_importance), v.hit_count])


def read_report(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [FeatureVerdict(r["feature"], Decision(r["decision"]), float(r["mean_importance"]),
                               int(r["hit_count"])) for r in csv.DictReader(fh)]


def write_boxplot(result: BorutaResult, path):
    """Long-format importance samples: one row per (feature, run)."""
    decision = {v.feature_name: v.decision.value for v in result.verdicts}
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "decision", "run", "importance"])
        for run, rec in enumerate(result.history, 1):
            for name, val in rec.items():
                w.writerow([name, decision.get(name, "Shadow"), run, repr(val)])


__all__ = ["BorutaConfig", "BorutaResult", "Decision", "FeatureVerdict", "run_boruta",
           "importance_report", "write_report", "read_report", "write_boxplot"]
