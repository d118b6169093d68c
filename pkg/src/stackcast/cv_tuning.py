"""Repeated k-fold cross-validation and grid search by minimum mean RMSE."""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import StackcastError, TooFewRows
from .evaluation import mae, mape, r_squared, rmse
from .learners import PARAMS, make_params
from .learners._common import unpack

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CvSpec:
    folds: int = 10
    repeats: int = 1
    rng_seed: int = 0
    shuffle: bool = True
    time_series: bool = False  # forward-chaining splits instead of random folds

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


# resampling protocols: (folds, repeats)
PRESETS = {
    "glmnet": (10, 6),
    "rf": (12, 8),
    "svr": (10, 1),
    "stack-meta": (10, 5),
}


def preset(name, rng_seed=0, time_series=False) -> CvSpec:
    folds, repeats = PRESETS[name]
    return CvSpec(folds, repeats, rng_seed, True, time_series)


def kfold_indices(n, spec: CvSpec):
    """Fold id per row for each repeat: an ``(repeats, n)`` integer array.

    Fold sizes differ by at most one. With ``shuffle=False`` folds are
    contiguous blocks and identical across repeats.
    """
    if n < spec.folds:
        raise TooFewRows(f"{n} rows cannot fill {spec.folds} folds")
    base = np.repeat(np.arange(spec.folds), [len(c) for c in np.array_split(np.arange(n), spec.folds)])
    out = np.empty((spec.repeats, n), dtype=np.int64)
    streams = np.random.SeedSequence(spec.rng_seed).spawn(spec.repeats)
    for r in range(spec.repeats):
        if spec.shuffle:
            perm = np.random.default_rng(streams[r]).permutation(n)
            out[r, perm] = base
        else:
            out[r] = base
    return out


@dataclass(frozen=True)
class Split:
    repeat: int
    fold: int
    train: np.ndarray
    valid: np.ndarray


def splits(n, spec: CvSpec):
    """All (train, validate) index pairs.

    Time-series mode cuts the rows into ``folds + 1`` contiguous blocks and
    validates block j+1 on everything before it; it has a single repeat.
    """
    if spec.time_series:
        if n < spec.folds + 1:
            raise TooFewRows(f"{n} rows cannot form {spec.folds} forward-chaining splits")
        blocks = np.array_split(np.arange(n), spec.folds + 1)
        return [Split(0, j, np.concatenate(blocks[: j + 1]), blocks[j + 1]) for j in range(spec.folds)]
    ids = kfold_indices(n, spec)
    out = []
    for r in range(spec.repeats):
        for f in range(spec.folds):
            out.append(Split(r, f, np.flatnonzero(ids[r] != f), np.flatnonzero(ids[r] == f)))
    return out


def expand_grid(grid):
    """Cartesian product of a ``{name: [values]}`` mapping (declaration order); lists pass through."""
    if isinstance(grid, dict):
        keys = list(grid)
        vals = [v if isinstance(v, (list, tuple)) else [v] for v in grid.values()]
        return [dict(zip(keys, combo)) for combo in itertools.product(*vals)]
    return [dict(g) for g in grid]


@dataclass
class FoldRecord:
    candidate: int
    repeat: int
    fold: int
    rmse: float
    mae: float
    mape: float
    r_squared: float


@dataclass
class GridResult:
    kind: str
    candidates: list
    mean_rmse: np.ndarray
    std_rmse: np.ndarray
    winner: int
    records: list = field(default_factory=list)

    @property
    def best(self):
        return self.candidates[self.winner]

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["candidate", "params", "repeat", "fold", "rmse", "mae", "mape", "r_squared"])
            for rec in self.records:
                w.writerow([rec.candidate, _fmt_params(self.candidates[rec.candidate]), rec.repeat,
                            rec.fold, repr(rec.rmse), repr(rec.mae), repr(rec.mape), repr(rec.r_squared)])
            w.writerow([])
            w.writerow(["# summary", "params", "mean_rmse", "std_rmse", "winner"])
            for i, c in enumerate(self.candidates):
                w.writerow([i, _fmt_params(c), repr(float(self.mean_rmse[i])), repr(float(self.std_rmse[i])),
                            int(i == self.winner)])


def _fmt_params(d):
    return ";".join(f"{k}={d[k]}" for k in d)


def select_winner(mean_rmse):
    """Index of the minimum mean RMSE; ties go to the earliest candidate."""
    return int(np.argmin(np.asarray(mean_rmse)))


def with_context(exc, context):
    """Same-typed copy of ``exc`` with ``context`` prefixed to its message."""
    try:
        return type(exc)(f"{context}: {exc}")
    except TypeError:
        err = StackcastError(f"{context}: {exc}")
        err.exit_code = exc.exit_code
        return err


def _safe(fn, a, f):
    try:
        return fn(a, f)
    except StackcastError:
        return float("nan")


def grid_search(m, kind, grid, spec: CvSpec, fixed=None, target_unscale=None) -> GridResult:
    """Evaluate every candidate on the same (repeat, fold) splits and pick the lowest mean RMSE.

    ``kind`` names a learner (``glmnet``, ``rf``, ``svr``) or is a callable
    mapping a parameter dict to an object with ``fit(X, y, columns)``.
    ``target_unscale`` maps targets/predictions back to reporting units
    before scoring.
    """
    X, y, columns = unpack(m)
    candidates = expand_grid(grid)
    if not candidates:
        raise ValueError("grid search needs at least one candidate")
    fixed = dict(fixed or {})
    if callable(kind):
        factory, label = kind, getattr(kind, "__name__", "custom")
    else:
        if kind not in PARAMS:
            raise ValueError(f"unknown learner kind {kind!r}")
        factory, label = (lambda c: make_params(kind, **{**fixed, **c})), kind
    unscale = target_unscale or (lambda v: v)
    folds = splits(len(y), spec)
    records = []
    per_cand = [[] for _ in candidates]
    for ci, cand in enumerate(candidates):
        params = factory(cand)
        for sp in folds:
            try:
                model = params.fit(X[sp.train], y[sp.train], columns)
                pred = model.predict_array(X[sp.valid])
            except StackcastError as exc:
                raise with_context(exc, f"candidate {ci} ({_fmt_params(cand)}), repeat {sp.repeat}, "
                                        f"fold {sp.fold}") from exc
            a, f = unscale(y[sp.valid]), unscale(pred)
            rec = FoldRecord(ci, sp.repeat, sp.fold, rmse(a, f), mae(a, f), _safe(mape, a, f),
                             _safe(r_squared, a, f))
            records.append(rec)
            per_cand[ci].append(rec.rmse)
        log.debug("%s candidate %d %s: mean RMSE %.6g", label, ci, _fmt_params(cand), np.mean(per_cand[ci]))
    mean = np.array([np.mean(v) for v in per_cand])
    std = np.array([np.std(v, ddof=1) if len(v) > 1 else 0.0 for v in per_cand])
    return GridResult(label, candidates, mean, std, select_winner(mean), records)


__all__ = ["CvSpec", "PRESETS", "preset", "kfold_indices", "splits", "Split", "expand_grid",
           "GridResult", "FoldRecord", "grid_search", "select_winner", "with_context"]
