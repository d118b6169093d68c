import json
import logging
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from stackcast.cli import main
from stackcast.errors import ConfigError
from stackcast.config import load
from stackcast.indicators import FeatureMatrix
from stackcast.learners import save_model
from stackcast.learners.elastic_net import ElasticNetModel
from stackcast.preprocess import ScalerState

FIXTURE_CSV = Path(str(resources.files("stackcast") / "data" / "fixture_600.csv"))

FAST = """
seed = 3
out = "out"

[data]
path = "{data}"
boundary = "2018-04-25"

[features]
preset = "{preset}"
normalize = {normalize}

[select]
enabled = {select}
max_runs = 8
[select.forest]
ntree = 20

[train]
models = ["glmnet", "rf", "svr", "stack"]
[train.glmnet]
folds = 3
repeats = 1
grid = {{ alpha = [1.0], lambda = [1e-4, 1e-2] }}
[train.rf]
folds = 3
repeats = 1
grid = {{ ntree = [20], bag_fraction = [0.5] }}
[train.svr]
folds = 3
repeats = 1
grid = {{ cost = [1.0], epsilon = [0.01] }}
[train.stack]
folds = 3
repeats = 1
meta_folds = 3
meta_repeats = 1
"""


def write_config(tmp_path, data=FIXTURE_CSV, preset="selected", normalize="true", select="true"):
    p = tmp_path / "cfg.toml"
    p.write_text(FAST.format(data=Path(data).as_posix(), preset=preset, normalize=normalize, select=select))
    return p


def run(cfg, *args):
    return main([*args, "--config", str(cfg), "--quiet"])


def test_stages_in_order(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert run(cfg, "features") == 0
    train = FeatureMatrix.from_csv(out / "features_train.csv")
    test = FeatureMatrix.from_csv(out / "features_test.csv")
    assert train.n_features == 34 and train.column_names == test.column_names
    assert train.dates[-1] <= np.datetime64("2018-04-25") < test.dates[0]
    assert train.X.min() == 0.0 and train.X.max() == 1.0
    assert not ScalerState.load(out / "scaler.json").identity

    assert run(cfg, "select") == 0
    chosen = json.loads((out / "selected_features.json").read_text())["features"]
    assert chosen and set(chosen) <= set(train.column_names)
    assert (out / "boruta_report.csv").read_text().startswith("feature,decision,mean_importance,hit_count")

    for m in ("glmnet", "rf", "svr", "stack"):
        assert run(cfg, "train", "--model", m) == 0
        doc = json.loads((out / "models" / m / "model.json").read_text())
        assert doc["kind"] == m and doc["seed"] == 3
        assert (out / "models" / m / "cv_results.csv").exists()
    assert run(cfg, "evaluate") == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert {(r["model_name"], r["slice"]) for r in metrics} == {
        (m, s) for m in ("glmnet", "rf", "svr", "stack") for s in ("train", "test")}
    table = (out / "comparison.md").read_text()
    assert sum(line.startswith("| ") for line in table.splitlines()) == 5
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 3 and "evaluate" in manifest["stages"]


def test_rerun_is_cached(tmp_path, caplog):
    cfg = write_config(tmp_path, preset="raw", select="false")
    assert run(cfg, "run-all") == 0
    first = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert main(["run-all", "--config", str(cfg)]) == 0
    second = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert all(v["cached"] for v in second["stages"].values())
    assert {k: v["input_hash"] for k, v in first["stages"].items()} == \
           {k: v["input_hash"] for k, v in second["stages"].items()}
    # a different seed invalidates the stamps
    assert run(cfg, "select", "--seed", "4") == 0
    third = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert third["stages"]["select"]["cached"] is False


def test_identity_scaler(tmp_path):
    cfg = write_config(tmp_path, preset="raw", normalize="false")
    assert run(cfg, "features") == 0
    s = ScalerState.load(tmp_path / "out" / "scaler.json")
    assert s.identity
    train = FeatureMatrix.from_csv(tmp_path / "out" / "features_train.csv")
    assert train.X.max() > 1.0


def test_oracle_model_scores_zero(tmp_path):
    cfg = write_config(tmp_path, preset="raw", select="false")
    assert run(cfg, "features") == 0
    assert run(cfg, "select") == 0
    assert run(cfg, "train", "--model", "glmnet") == 0
    cols = json.loads((tmp_path / "out" / "selected_features.json").read_text())["features"]
    # the target is the same-day close, scaled with the same train min/max as the Close column
    coef = np.array([1.0 if c == "Close" else 0.0 for c in cols])
    save_model(ElasticNetModel(0.0, coef, tuple(cols)), tmp_path / "out" / "models" / "glmnet" / "model.json")
    text = (tmp_path / "cfg.toml").read_text().replace('models = ["glmnet", "rf", "svr", "stack"]',
                                                       'models = ["glmnet"]')
    (tmp_path / "cfg.toml").write_text(text)
    assert run(cfg, "evaluate") == 0
    metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
    assert len(metrics) == 2
    for r in metrics:
        assert r["rmse"] < 1e-9 and r["mae"] < 1e-9 and r["r_squared"] == pytest.approx(1.0)
    err = (tmp_path / "out" / "error_series_glmnet.csv").read_text().splitlines()
    assert err[0] == "date,residual" and all(abs(float(line.split(",")[1])) < 1e-9 for line in err[1:])


def test_single_feature_select(tmp_path):
    cfg = write_config(tmp_path)
    text = cfg.read_text().replace('preset = "selected"', 'preset = "custom"\ncustom = [{ kind = "SMA", window = 5 }]')
    cfg.write_text(text)
    assert run(cfg, "features") == 0
    assert run(cfg, "select") == 0
    report = (tmp_path / "out" / "boruta_report.csv").read_text().splitlines()
    assert len(report) == 2 and report[1].startswith("SMA5,")


def test_missing_data_is_config_error(tmp_path, caplog):
    cfg = write_config(tmp_path, data=tmp_path / "nope.csv")
    with caplog.at_level(logging.ERROR, logger="stackcast"):
        assert run(cfg, "run-all") == 1
    assert not (tmp_path / "out" / "features_train.csv").exists()
    with pytest.raises(ConfigError):
        load(tmp_path / "absent.toml")
    assert main(["features", "--config", str(tmp_path / "absent.toml"), "--quiet"]) == 1


def test_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("seed = [\n")
    assert run(p, "features") == 1


def test_missing_features_names_producer(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run(cfg, "select") == 3
    assert "cmd_features" in capsys.readouterr().err
    assert run(cfg, "train", "--model", "rf") == 3


def test_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,open,high,low,close,volumefrom,volumeto\n2018-01-01,1,0.5,0.9,1,1,1\n")
    cfg = write_config(tmp_path, data=bad)
    assert run(cfg, "features") == 2


def test_model_feature_mismatch(tmp_path):
    cfg = write_config(tmp_path, preset="raw", select="false")
    assert run(cfg, "features") == 0 and run(cfg, "select") == 0
    assert run(cfg, "train", "--model", "svr") == 0
    save_model(ElasticNetModel(0.0, np.zeros(1), ("missing",)), tmp_path / "out" / "models" / "svr" / "model.json")
    text = cfg.read_text().replace('models = ["glmnet", "rf", "svr", "stack"]', 'models = ["svr"]')
    cfg.write_text(text)
    assert run(cfg, "evaluate") == 2
