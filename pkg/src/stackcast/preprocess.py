"""Min-max normalization fitted on the training slice, with its exact inverse."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ColumnMismatch, EmptyMatrix
from .indicators import FeatureMatrix

log = logging.getLogger(__name__)

TARGET = "target"


@dataclass(frozen=True)
class ScalerState:
    """Per-column minimum and maximum. The target has its own entry named ``target``."""

    names: tuple
    minimum: np.ndarray
    maximum: np.ndarray
    identity: bool = False

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        lo = np.array(self.minimum, dtype=np.float64)
        hi = np.array(self.maximum, dtype=np.float64)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)
        if not (len(self.names) == len(lo) == len(hi)):
            raise ValueError("names, minimum and maximum must align")
        if np.any(hi < lo):
            raise ValueError("maximum must be >= minimum for every column")

    @classmethod
    def identity_for(cls, names):
        names = tuple(names) + (TARGET,)
        return cls(names, np.zeros(len(names)), np.ones(len(names)), identity=True)

    @property
    def degenerate(self):
        return tuple(n for n, lo, hi in zip(self.names, self.minimum, self.maximum) if hi == lo)

    def _cols(self, names):
        names = tuple(names)
        if self.names[:-1] != names:
            raise ColumnMismatch(f"scaler was fit on {list(self.names[:-1])}, got {list(names)}")
        return self.minimum[:-1], self.maximum[:-1]

    def scale_target(self, y):
        return _forward(np.asarray(y, dtype=np.float64), self.minimum[-1], self.maximum[-1])

    def unscale_target(self, y):
        return _backward(np.asarray(y, dtype=np.float64), self.minimum[-1], self.maximum[-1])

    def to_dict(self):
        return {
            "format": "stackcast.scaler",
            "version": 1,
            "identity": self.identity,
            "columns": list(self.names),
            "minimum": self.minimum.tolist(),
            "maximum": self.maximum.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["columns"], d["minimum"], d["maximum"], bool(d.get("identity", False)))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _forward(x, lo, hi):
    span = hi - lo
    span = np.where(span == 0, 1.0, span)
    out = (x - lo) / span
    # constant columns map to 0
    return np.where(hi == lo, 0.0, out)


def _backward(x, lo, hi):
    return x * (hi - lo) + lo


def fit_scaler(train: FeatureMatrix) -> ScalerState:
    """Record column-wise min/max (features and target) of the training slice only."""
    if len(train) == 0:
        raise EmptyMatrix("cannot fit a scaler on an empty matrix")
    full = np.column_stack([train.X, train.target])
    state = ScalerState(train.column_names + (TARGET,), full.min(axis=0), full.max(axis=0))
    if state.degenerate:
        log.warning("constant columns normalize to 0: %s", ", ".join(state.degenerate))
    return state


def transform(state: ScalerState, m: FeatureMatrix) -> FeatureMatrix:
    """Apply the min-max map; test values outside the training range are not clamped."""
    lo, hi = state._cols(m.column_names)
    X = _forward(m.X, lo, hi)
    y = state.scale_target(m.target)
    return m.with_values(X, y)


def inverse_transform(state: ScalerState, m: FeatureMatrix) -> FeatureMatrix:
    lo, hi = state._cols(m.column_names)
    return m.with_values(_backward(m.X, lo, hi), state.unscale_target(m.target))
