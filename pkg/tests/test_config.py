import argparse
import json

import pytest

from ringseg.cli import pipeline_config
from ringseg.config import ConfigError, PipelineConfig, load_config, mask_name, merge, parse_mask
from ringseg.knn import BOOLEAN_ONLY, F1_ONLY, FULL, FeatureMask


def test_defaults_round_trip():
    cfg = PipelineConfig()
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    assert json.loads(json.dumps(cfg.to_dict())) == cfg.to_dict()


def test_custom_round_trip(tmp_path):
    doc = {
        "segmenter": {"alpha": 0.2, "min_gap": 0.5},
        "features": {"poly_degree": 3},
        "masks": {"grasp": "f1_only", "release": {"use_f1": False, "use_f23": True}},
        "k": 12,
        "exemplars": {"grasp": 4},
        "seed": 9,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    cfg = load_config(path)
    assert cfg.segmenter.alpha == 0.2 and cfg.features.poly_degree == 3
    assert cfg.masks == {"grasp": F1_ONLY, "release": BOOLEAN_ONLY}
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"segmenter": {"alpah": 0.1}},
        {"masks": {"jump": "full"}},
        {"masks": {"grasp": "sometimes"}},
        {"exemplars": {"grasp": -1}},
        {"k": 0},
        {"k": "many"},
        {"segmenter": {"alpha": 2.0}},
    ],
)
def test_invalid_configs(doc):
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict(doc)


def test_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(path)


def test_mask_names():
    assert parse_mask("full") == FULL
    assert mask_name(FeatureMask(use_f1=False, use_f23=True)) == "boolean_only"
    with pytest.raises(ConfigError):
        parse_mask({"use_f1": False, "use_f23": False})


def test_merge():
    base = {"a": 1, "b": {"c": 2, "d": 3}}
    assert merge(base, {"b": {"c": None, "d": 4}, "e": {"f": None}}) == {"a": 1, "b": {"c": 2, "d": 4}, "e": {}}
    assert base == {"a": 1, "b": {"c": 2, "d": 3}}


def _args(**kw):
    keys = ("config", "alpha", "window", "min_gap", "cutoff", "poly_degree", "k", "seed")
    return argparse.Namespace(**{k: kw.get(k) for k in keys})


def test_precedence(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"segmenter": {"alpha": 0.3, "min_gap": 0.7}, "k": 5}))
    default = PipelineConfig()
    assert pipeline_config(_args()) == default
    from_file = pipeline_config(_args(config=str(path)))
    assert (from_file.segmenter.alpha, from_file.segmenter.min_gap, from_file.k) == (0.3, 0.7, 5)
    flagged = pipeline_config(_args(config=str(path), alpha=0.4, k=7))
    assert (flagged.segmenter.alpha, flagged.segmenter.min_gap, flagged.k) == (0.4, 0.7, 7)
    assert flagged.segmenter.sg_window == default.segmenter.sg_window
