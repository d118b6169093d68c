from pathlib import Path

import numpy as np
import pytest

from stackcast.config import from_dict, load, override, parse_boundary
from stackcast.errors import ConfigError

BASE = {"data": {"path": "x.csv", "boundary": "2018-02-05"}}


def test_boundary_formats():
    assert parse_boundary("05/02/2018") == np.datetime64("2018-02-05")
    assert parse_boundary("2018-02-05") == np.datetime64("2018-02-05")
    with pytest.raises(ConfigError):
        parse_boundary("Feb 5")


def test_defaults_and_paths(tmp_path):
    cfg = from_dict(BASE, tmp_path)
    assert cfg.data_path == tmp_path / "x.csv"
    assert len(cfg.features) == 37 and cfg.models == ("glmnet", "rf", "svr", "stack")
    assert (cfg.learners["rf"].folds, cfg.learners["rf"].repeats) == (12, 8)
    assert (cfg.learners["glmnet"].folds, cfg.learners["glmnet"].repeats) == (10, 6)
    assert (cfg.stack.meta.cost, cfg.stack.meta.epsilon) == (1.0, 0.01)
    o = override(cfg, seed=9, out=tmp_path / "o", horizon=1, drop_tentative=True)
    assert (o.seed, o.out, o.horizon, o.drop_tentative) == (9, tmp_path / "o", 1, True)
    assert o.boruta.rng_seed == 9


@pytest.mark.parametrize("doc", [
    {},
    {"data": {"path": "x.csv"}},
    {**BASE, "features": {"preset": "nope"}},
    {**BASE, "train": {"models": ["xgboost"]}},
    {**BASE, "select": {"p_value": 2.0}},
    {**BASE, "features": {"preset": "custom"}},
])
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        from_dict(doc, Path("."))


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parents[1]
    for p in list((root / "configs").glob("*.toml")) + list((root / "src" / "stackcast" / "data").glob("*.toml")):
        cfg = load(p)
        assert cfg.models
