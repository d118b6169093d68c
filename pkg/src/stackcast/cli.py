"""Command-line pipeline: features -> select -> train -> evaluate.

Every stage writes into the output directory and leaves a stamp recording a
fingerprint of its settings and input files. Re-running a stage whose
fingerprint and outputs are unchanged is a no-op.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from . import config as config_mod
from .cv_tuning import CvSpec, grid_search, with_context
from .errors import (ConfigError, DataError, ModelFeatureMismatch, StackcastError, StageError,
                     TooFewFeatures)
from .evaluation import comparison_table, compute_metrics, error_series, save_metrics
from .feature_select import BorutaResult, Decision, FeatureVerdict, run_boruta, write_boxplot, write_report
from .indicators import FeatureMatrix, build_feature_matrix, warmup
from .learners import ElasticNetParams, ForestParams, load_model, make_params, save_model
from .learners._common import unpack
from .market_data import load_csv, split
from .preprocess import ScalerState, fit_scaler, transform
from .stacking import StackConfig, fit_stack, out_of_fold

log = logging.getLogger("stackcast")


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_hash(doc):
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


class Pipeline:
    def __init__(self, cfg: config_mod.PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)

    # paths
    @property
    def train_csv(self):
        return self.out / "features_train.csv"

    @property
    def test_csv(self):
        return self.out / "features_test.csv"

    @property
    def scaler_json(self):
        return self.out / "scaler.json"

    @property
    def selected_json(self):
        return self.out / "selected_features.json"

    def model_dir(self, name):
        return self.out / "models" / name

    def model_json(self, name):
        return self.model_dir(name) / "model.json"

    # stage machinery
    def _key(self, path):
        """Input label: relative inside the output directory so fingerprints survive --out."""
        try:
            return path.relative_to(self.out).as_posix()
        except ValueError:
            return str(path)

    def _stage(self, name, settings, inputs, outputs, body):
        """Run ``body`` unless the stamp shows identical settings, inputs and outputs."""
        stamp_path = self.out / ".stamps" / f"{name}.json"
        fingerprint = _json_hash({"stage": name, "version": __version__, "seed": self.cfg.seed,
                                  "settings": settings,
                                  "inputs": {self._key(p): file_hash(p) for p in inputs}})
        slog = logging.LoggerAdapter(log, {"stage": name})
        if stamp_path.exists():
            stamp = json.loads(stamp_path.read_text())
            if stamp.get("fingerprint") == fingerprint and all(
                (self.out / rel).exists() and file_hash(self.out / rel) == h
                for rel, h in stamp.get("outputs", {}).items()
            ):
                slog.info("up to date, skipping")
                self._record(name, fingerprint, stamp["outputs"], 0.0, cached=True)
                return
        t0 = time.perf_counter()
        try:
            body(slog)
        except StackcastError as exc:
            raise with_context(exc, f"stage {name}") from exc
        except (ValueError, ArithmeticError, OSError) as exc:
            raise StageError(name, str(exc)) from exc
        dur = time.perf_counter() - t0
        outs = {str(p.relative_to(self.out)): file_hash(p) for p in outputs() if p.exists()}
        stamp_path.parent.mkdir(parents=True, exist_ok=True)
        _write_json(stamp_path, {"stage": name, "fingerprint": fingerprint, "outputs": outs})
        self._record(name, fingerprint, outs, dur, cached=False)
        slog.info("done in %.2fs", dur)

    def _record(self, name, fingerprint, outputs, duration, cached):
        path = self.out / "manifest.json"
        doc = json.loads(path.read_text()) if path.exists() else {}
        doc.update({"stackcast_version": __version__, "numpy_version": np.__version__,
                    "kernel_backend": _kernels.BACKEND, "seed": self.cfg.seed,
                    "data": {"path": str(self.cfg.data_path),
                             "sha256": file_hash(self.cfg.data_path) if self.cfg.data_path.exists() else None}})
        doc.setdefault("stages", {})[name] = {"version": __version__, "seed": self.cfg.seed,
                                              "input_hash": fingerprint, "outputs": outputs,
                                              "duration_s": round(duration, 3), "cached": cached}
        _write_json(path, doc)

    def _require(self, path, producer):
        if not path.exists():
            raise StageError(producer, f"missing {path.name}; run `{producer.replace('cmd_', '')}` first "
                                       f"(produced by {producer})")

    def _scaler(self):
        self._require(self.scaler_json, "cmd_features")
        return ScalerState.load(self.scaler_json)

    def _selected(self):
        self._require(self.selected_json, "cmd_select")
        return json.loads(self.selected_json.read_text())["features"]

    # stages
    def features(self):
        cfg = self.cfg
        config_mod.check_inputs(cfg)
        self.out.mkdir(parents=True, exist_ok=True)

        def body(slog):
            series = load_csv(cfg.data_path, cfg.schema)
            pre, post = split(series, cfg.boundary)
            fm = build_feature_matrix(series, cfg.features, cfg.horizon)
            is_train = fm.dates <= cfg.boundary
            train, test = fm.rows(np.flatnonzero(is_train)), fm.rows(np.flatnonzero(~is_train))
            if len(train) == 0 or len(test) == 0:
                raise DataError(f"split at {cfg.boundary} leaves {len(train)} train and {len(test)} test rows")
            slog.info("%d rows: %d on/before %s, %d after", len(series), len(pre), cfg.boundary, len(post))
            slog.info("dropped %d warm-up rows (longest warm-up %d) and %d horizon rows; train %d, test %d",
                      len(pre) - len(train), max((warmup(s) for s in cfg.features), default=0),
                      len(post) - len(test), len(train), len(test))
            scaler = fit_scaler(train) if cfg.normalize else ScalerState.identity_for(fm.column_names)
            transform(scaler, train).to_csv(self.train_csv)
            transform(scaler, test).to_csv(self.test_csv)
            scaler.save(self.scaler_json)

        self._stage("features", cfg.section_doc("features"), [cfg.data_path],
                    lambda: [self.train_csv, self.test_csv, self.scaler_json], body)

    def select(self):
        cfg = self.cfg
        self._require(self.train_csv, "cmd_features")
        report, boxplot = self.out / "boruta_report.csv", self.out / "boruta_boxplot.csv"

        def body(slog):
            train = FeatureMatrix.from_csv(self.train_csv)
            if cfg.select_enabled:
                boruta = replace(cfg.boruta, forest_params=replace(cfg.boruta.forest_params, n_jobs=cfg.jobs))
                result = run_boruta(train, boruta)
            else:
                slog.info("selection disabled; keeping all %d features", train.n_features)
                result = BorutaResult([FeatureVerdict(c, Decision.CONFIRMED, 0.0, 0) for c in train.column_names], 0)
            write_report(result.verdicts, report)
            write_boxplot(result, boxplot)
            keep = result.selected(include_tentative=not cfg.drop_tentative)
            counts = {d.value: sum(v.decision is d for v in result.verdicts) for d in Decision}
            slog.info("%d runs: %s; keeping %d features", result.runs,
                      ", ".join(f"{v} {k}" for k, v in counts.items()), len(keep))
            if not keep:
                raise TooFewFeatures("feature selection kept no features")
            _write_json(self.selected_json, {"features": keep, "drop_tentative": cfg.drop_tentative})

        self._stage("select", cfg.section_doc("select"), [self.train_csv],
                    lambda: [report, boxplot, self.selected_json], body)

    def _train_matrix(self):
        self._require(self.train_csv, "cmd_features")
        return FeatureMatrix.from_csv(self.train_csv).select(self._selected())

    def train(self, model):
        if model not in config_mod.MODELS:
            raise ConfigError(f"unknown model {model!r}")
        cfg = self.cfg
        self._require(self.train_csv, "cmd_features")
        self._require(self.selected_json, "cmd_select")
        mdir = self.model_dir(model)
        inputs = [self.train_csv, self.selected_json, self.scaler_json]
        if model == "stack" and cfg.stack.use_tuned:
            inputs += [self.model_json(b) for b in ("rf", "glmnet") if self.model_json(b).exists()]
        outputs = lambda: [self.model_json(model), mdir / "cv_results.csv", mdir / "scaler.json"]  # noqa: E731

        def body(slog):
            fm = self._train_matrix()
            scaler = self._scaler()
            mdir.mkdir(parents=True, exist_ok=True)
            if model == "stack":
                fitted, result = self._fit_stack(fm, scaler, slog)
            else:
                sec = cfg.learners[model]
                fixed = dict(sec.fixed)
                if model == "rf":
                    fixed.update(rng_seed=cfg.seed, n_jobs=cfg.jobs)
                spec = sec.cv(cfg.seed, cfg.time_series_cv)
                result = grid_search(fm, model, sec.grid, spec, fixed, scaler.unscale_target)
                best = {**fixed, **result.best}
                slog.info("%d candidates x %d fits; best %s (mean RMSE %.6g)", len(result.candidates),
                          len(result.records) // len(result.candidates), result.best,
                          result.mean_rmse[result.winner])
                fitted = make_params(model, **best).fit(*unpack(fm))
            save_model(fitted, self.model_json(model), extra={"seed": cfg.seed})
            result.to_csv(mdir / "cv_results.csv")
            shutil.copyfile(self.scaler_json, mdir / "scaler.json")

        self._stage(f"train-{model}", cfg.section_doc(model), inputs, outputs, body)

    def _base_params(self, kind, overrides):
        cfg = self.cfg
        if cfg.stack.use_tuned and self.model_json(kind).exists():
            p = load_model(self.model_json(kind)).params
        else:
            p = ForestParams(rng_seed=cfg.seed) if kind == "rf" else ElasticNetParams()
        p = replace(p, **{("lambda_" if k == "lambda" else k): v for k, v in overrides.items()})
        return replace(p, n_jobs=cfg.jobs) if kind == "rf" else p

    def _fit_stack(self, fm, scaler, slog):
        cfg = self.cfg
        st = cfg.stack
        sc = StackConfig((self._base_params("rf", st.rf), self._base_params("glmnet", st.glmnet)),
                         st.meta, st.folds, st.repeats, cfg.seed)
        X, y, columns = unpack(fm)
        oof = out_of_fold(X, y, columns, sc)
        grid = st.meta_grid or {"cost": [st.meta.cost], "epsilon": [st.meta.epsilon]}
        meta_spec = CvSpec(st.meta_folds, st.meta_repeats, cfg.seed, True, cfg.time_series_cv)
        result = grid_search((oof[0], y, sc.base_names()), "svr", grid, meta_spec,
                             {"tol": st.meta.tol, "max_passes": st.meta.max_passes}, scaler.unscale_target)
        meta = make_params("svr", **{**st.meta.to_dict(), **result.best})
        slog.info("bases %s; meta SVR %s (mean RMSE %.6g over %d fits)", list(sc.base_names()), result.best,
                  result.mean_rmse[result.winner], len(result.records))
        return fit_stack(fm, replace(sc, meta_spec=meta), oof=oof), result

    def evaluate(self):
        cfg = self.cfg
        self._require(self.train_csv, "cmd_features")
        self._require(self.test_csv, "cmd_features")
        names = [m for m in cfg.models if self.model_json(m).exists()]
        if not names:
            raise StageError("cmd_train", "no trained models found; run `train` first")
        inputs = [self.train_csv, self.test_csv, self.scaler_json] + [self.model_json(m) for m in names]
        written = []

        def body(slog):
            scaler = self._scaler()
            slices = {"train": FeatureMatrix.from_csv(self.train_csv), "test": FeatureMatrix.from_csv(self.test_csv)}
            reports = []
            for name in names:
                model = load_model(self.model_json(name))
                rows = []
                for sl, fm in slices.items():
                    try:
                        sub = fm.select(model.columns)
                    except StackcastError:
                        missing = [c for c in model.columns if c not in fm.column_names]
                        raise ModelFeatureMismatch(f"model {name} needs columns missing from "
                                                   f"features_{sl}.csv: {missing}") from None
                    actual = scaler.unscale_target(sub.target)
                    pred = scaler.unscale_target(model.predict_array(sub.X))
                    reports.append(compute_metrics(actual, pred, sl, name))
                    rows += [(str(d), sl, a, p) for d, a, p in zip(sub.dates, actual, pred)]
                    if sl == "test":
                        path = self.out / f"error_series_{name}.csv"
                        error_series(actual, pred, sub.dates).to_csv(path)
                        written.append(path)
                path = self.out / f"predictions_{name}.csv"
                with path.open("w", encoding="utf-8") as fh:
                    fh.write("date,slice,actual,predicted\n")
                    for d, sl, a, p in rows:
                        fh.write(f"{d},{sl},{float(a)!r},{float(p)!r}\n")
                written.append(path)
                test = reports[-1]
                slog.info("%s test: MAPE %.4f%%, RMSE %.4f, MAE %.4f, R2 %.4f", name, test.mape, test.rmse,
                          test.mae, test.r_squared)
            save_metrics(reports, self.out / "metrics.json")
            ok = all(r.rmse >= r.mae for r in reports)
            note = ("\nRMSE >= MAE in every row, as the two definitions require.\n" if ok
                    else "\nWARNING: a row has RMSE < MAE, which the definitions rule out.\n")
            (self.out / "comparison.md").write_text(comparison_table(reports) + note)
            written.extend([self.out / "metrics.json", self.out / "comparison.md"])

        self._stage("evaluate", {"models": names}, inputs, lambda: written, body)

    def run_all(self):
        t0 = time.perf_counter()
        self.features()
        self.select()
        # base learners first so the stack can reuse their tuned settings
        for m in sorted(self.cfg.models, key=lambda m: m == "stack"):
            self.train(m)
        self.evaluate()
        log.info("pipeline finished in %.2fs", time.perf_counter() - t0, extra={"stage": "run-all"})


class _StageFormatter(logging.Formatter):
    def format(self, record):
        record.stage = getattr(record, "stage", record.name)
        return super().format(record)


def _setup_logging(quiet):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_StageFormatter("%(levelname)s [%(stage)s] %(message)s"))
    root = logging.getLogger("stackcast")
    root.handlers[:] = [handler]
    root.setLevel(logging.ERROR if quiet else logging.INFO)
    root.propagate = False


def build_parser():
    p = argparse.ArgumentParser(prog="stackcast", description="Price forecasting pipeline with stacked learners.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="pipeline TOML file")
    common.add_argument("--seed", type=int, help="global random seed (overrides config)")
    common.add_argument("--out", type=Path, help="output directory (overrides config)")
    common.add_argument("--jobs", type=int, help="worker threads for forest fitting")
    common.add_argument("--horizon", type=int, help="forecast horizon in rows (0: same-day close)")
    common.add_argument("--drop-tentative", action="store_true", help="train on Confirmed features only")
    common.add_argument("--time-series-cv", action="store_true", help="forward-chaining CV instead of k-fold")
    common.add_argument("--quiet", action="store_true", help="log errors only")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("features", parents=[common], help="compute, split and scale the feature matrices")
    sub.add_parser("select", parents=[common], help="run Boruta feature selection")
    t = sub.add_parser("train", parents=[common], help="tune and fit one model")
    t.add_argument("--model", required=True, choices=config_mod.MODELS)
    sub.add_parser("evaluate", parents=[common], help="score trained models on train and test slices")
    sub.add_parser("run-all", parents=[common], help="run every stage in order")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _setup_logging(args.quiet)
    try:
        cfg = config_mod.load(args.config)
        cfg = config_mod.override(cfg, args.seed, args.out, args.jobs, args.horizon, args.drop_tentative,
                                  args.time_series_cv)
        if args.command in ("features", "run-all"):
            config_mod.check_inputs(cfg)
        pipe = Pipeline(cfg)
        if args.command == "features":
            pipe.features()
        elif args.command == "select":
            pipe.select()
        elif args.command == "train":
            pipe.train(args.model)
        elif args.command == "evaluate":
            pipe.evaluate()
        else:
            pipe.run_all()
    except StackcastError as exc:
        log.error("%s", exc, extra={"stage": args.command})
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
