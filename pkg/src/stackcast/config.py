"""Pipeline configuration: one TOML document with per-stage tables.

Relative paths resolve against the config file's directory. Command-line
flags are applied on top with :func:`override`.
"""

from __future__ import annotations

import datetime as dt
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cv_tuning import PRESETS, CvSpec
from .errors import ConfigError
from .feature_select import BorutaConfig
from .indicators import CANDIDATE_FEATURES, SELECTED_FEATURES, RAW_FEATURES, spec
from .learners import ForestParams, SvrParams
from .market_data import DEFAULT_SCHEMA

MODELS = ("glmnet", "rf", "svr", "stack")
FEATURE_PRESETS = {"selected": SELECTED_FEATURES, "candidates": CANDIDATE_FEATURES, "raw": RAW_FEATURES}

# grids used when a config leaves a learner's table empty
DEFAULT_GRIDS = {
    "glmnet": {"alpha": [0.0, 0.5, 1.0], "lambda": [1e-4, 1e-3, 1e-2]},
    "rf": {"ntree": [500], "mtry": [None], "bag_fraction": [0.5, 0.75]},
    "svr": {"cost": [0.07, 0.25, 1.0], "epsilon": [0.1]},
}


def parse_boundary(value):
    """ISO ``YYYY-MM-DD`` or day-first ``DD/MM/YYYY``."""
    if isinstance(value, dt.date):
        return np.datetime64(value.isoformat(), "D")
    text = str(value).strip()
    try:
        if "/" in text:
            return np.datetime64(dt.datetime.strptime(text, "%d/%m/%Y").date().isoformat(), "D")
        return np.datetime64(dt.date.fromisoformat(text).isoformat(), "D")
    except ValueError:
        raise ConfigError(f"cannot parse boundary date {value!r}") from None


@dataclass(frozen=True)
class LearnerSection:
    grid: dict
    folds: int
    repeats: int
    fixed: dict = field(default_factory=dict)

    def cv(self, seed, time_series=False):
        return CvSpec(self.folds, self.repeats, seed, True, time_series)


@dataclass(frozen=True)
class StackSection:
    folds: int = 10
    repeats: int = 5
    meta: SvrParams = field(default_factory=lambda: SvrParams(cost=1.0, epsilon=0.01))
    meta_grid: dict = field(default_factory=dict)  # optional CV grid over the meta SVR
    meta_folds: int = 10
    meta_repeats: int = 5
    use_tuned: bool = True  # take base hyperparameters from the tuned glmnet/rf models
    rf: dict = field(default_factory=dict)
    glmnet: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineConfig:
    data_path: Path
    boundary: np.datetime64
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    features: tuple = tuple(CANDIDATE_FEATURES)
    horizon: int = 0
    normalize: bool = True
    select_enabled: bool = True
    boruta: BorutaConfig = field(default_factory=BorutaConfig)
    drop_tentative: bool = False
    learners: dict = field(default_factory=dict)
    stack: StackSection = field(default_factory=StackSection)
    models: tuple = MODELS
    time_series_cv: bool = False
    out: Path = Path("runs/default")
    seed: int = 0
    jobs: int = 1
    source: dict = field(default_factory=dict, repr=False, compare=False)

    def section_doc(self, name):
        """Plain-data view of one stage's settings, used for stage fingerprints."""
        if name == "features":
            return {"data": str(self.data_path), "schema": self.schema, "boundary": str(self.boundary),
                    "features": [s.to_dict() for s in self.features], "horizon": self.horizon,
                    "normalize": self.normalize}
        if name == "select":
            return {"enabled": self.select_enabled, "boruta": self.boruta.to_dict(),
                    "drop_tentative": self.drop_tentative}
        if name in ("glmnet", "rf", "svr"):
            sec = self.learners[name]
            return {"grid": sec.grid, "folds": sec.folds, "repeats": sec.repeats, "fixed": sec.fixed,
                    "time_series_cv": self.time_series_cv, "jobs": self.jobs if name == "rf" else 1}
        if name == "stack":
            s = self.stack
            return {"folds": s.folds, "repeats": s.repeats, "meta": s.meta.to_dict(), "meta_grid": s.meta_grid,
                    "meta_folds": s.meta_folds, "meta_repeats": s.meta_repeats, "use_tuned": s.use_tuned,
                    "rf": s.rf, "glmnet": s.glmnet, "time_series_cv": self.time_series_cv}
        return {}


def _table(doc, key):
    v = doc.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"[{key}] must be a table")
    return v


def _features(sec):
    preset = sec.get("preset", "candidates")
    if preset == "custom":
        items = sec.get("custom", [])
        if not items:
            raise ConfigError("features.preset = 'custom' needs at least one [[features.custom]] entry")
        try:
            out = []
            for it in items:
                it = dict(it)
                out.append(spec(it.pop("kind"), it.pop("window", None), it.pop("name", None), **it))
            return tuple(out)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad custom feature: {exc}") from None
    if preset not in FEATURE_PRESETS:
        raise ConfigError(f"unknown feature preset {preset!r}; expected one of "
                          f"{sorted(FEATURE_PRESETS) + ['custom']}")
    return tuple(FEATURE_PRESETS[preset])


def _learner(kind, sec):
    grid = sec.get("grid", DEFAULT_GRIDS[kind])
    preset = sec.get("preset", kind)
    if preset not in PRESETS:
        raise ConfigError(f"unknown cv preset {preset!r}")
    folds, repeats = PRESETS[preset]
    folds = int(sec.get("folds", folds))
    repeats = int(sec.get("repeats", repeats))
    # TOML has no null; "auto" stands for the learner default
    grid = {k: [None if x == "auto" else x for x in (v if isinstance(v, list) else [v])] for k, v in grid.items()}
    return LearnerSection(grid, folds, repeats, dict(sec.get("fixed", {})))


def from_dict(doc, base_dir=Path(".")) -> PipelineConfig:
    try:
        data = _table(doc, "data")
        if "path" not in data:
            raise ConfigError("[data] needs a 'path'")
        if "boundary" not in data:
            raise ConfigError("[data] needs a 'boundary' date")
        path = Path(data["path"])
        if not path.is_absolute():
            path = Path(os.path.normpath(base_dir / path))
        schema = dict(DEFAULT_SCHEMA)
        schema.update(data.get("schema", {}))

        feat = _table(doc, "features")
        sel = _table(doc, "select")
        boruta_doc = {k: sel[k] for k in ("max_runs", "p_value", "importance") if k in sel}
        seed = int(doc.get("seed", 0))
        boruta = BorutaConfig(**boruta_doc, rng_seed=seed,
                              forest_params=ForestParams.from_dict({"ntree": 100, "bag_fraction": 0.632,
                                                                    **sel.get("forest", {})}))
        train = _table(doc, "train")
        learners = {k: _learner(k, _table(train, k)) for k in ("glmnet", "rf", "svr")}
        st = _table(train, "stack")
        meta = SvrParams.from_dict({"cost": 1.0, "epsilon": 0.01, **st.get("meta", {})})
        mf, mr = PRESETS["stack-meta"]
        stack = StackSection(int(st.get("folds", 10)), int(st.get("repeats", 5)), meta,
                             dict(st.get("meta_grid", {})), int(st.get("meta_folds", mf)),
                             int(st.get("meta_repeats", mr)), bool(st.get("use_tuned", True)),
                             dict(st.get("rf", {})), dict(st.get("glmnet", {})))
        models = tuple(train.get("models", MODELS))
        bad = [m for m in models if m not in MODELS]
        if bad:
            raise ConfigError(f"unknown models {bad}; expected a subset of {list(MODELS)}")
        out = Path(doc.get("out", "runs/default"))
        return PipelineConfig(
            data_path=path, boundary=parse_boundary(data["boundary"]), schema=schema,
            features=_features(feat), horizon=int(feat.get("horizon", 0)),
            normalize=bool(feat.get("normalize", True)), select_enabled=bool(sel.get("enabled", True)),
            boruta=boruta, drop_tentative=bool(sel.get("drop_tentative", False)), learners=learners,
            stack=stack, models=models, time_series_cv=bool(train.get("time_series_cv", False)),
            out=out if out.is_absolute() else base_dir / out, seed=seed, jobs=int(doc.get("jobs", 1)),
            source=doc,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(doc, path.resolve().parent)


def override(cfg: PipelineConfig, seed=None, out=None, jobs=None, horizon=None, drop_tentative=None,
             time_series_cv=None) -> PipelineConfig:
    """Apply command-line flags; ``None`` leaves a setting alone."""
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
        changes["boruta"] = replace(cfg.boruta, rng_seed=int(seed))
    if out is not None:
        changes["out"] = Path(out)
    if jobs is not None:
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        changes["jobs"] = int(jobs)
    if horizon is not None:
        if horizon < 0:
            raise ConfigError("--horizon must be >= 0")
        changes["horizon"] = int(horizon)
    if drop_tentative:
        changes["drop_tentative"] = True
    if time_series_cv:
        changes["time_series_cv"] = True
    return replace(cfg, **changes)


def check_inputs(cfg: PipelineConfig):
    if not cfg.data_path.is_file():
        raise ConfigError(f"data file not found: {cfg.data_path}")


__all__ = ["PipelineConfig", "LearnerSection", "StackSection", "load", "from_dict", "override",
           "parse_boundary", "check_inputs", "MODELS", "DEFAULT_GRIDS"]
