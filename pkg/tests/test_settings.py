import json

import pytest

from recsys_fairness_eval.errors import ConfigError
from recsys_fairness_eval.settings import (
    EvalConfig,
    MeasureParams,
    ScenarioSpec,
    build_model,
    config_hash,
    load_config,
)


def test_defaults():
    config = load_config()
    assert config.k == 10
    assert config.rerank_depth == 25
    assert config.params.thresholds == (1.1, 0.9)
    assert config.params.gamma_hd == 0.9
    assert config.seed == 42


def test_depth_below_k():
    with pytest.raises(ConfigError):
        load_config(overrides={"k": 10, "rerank_depth": 5})


@pytest.mark.parametrize(
    "params",
    [{"log_base": 1}, {"thresholds": (0.9, 1.1)}, {"gamma_hd": 1.0}, {"gce": (1, 0.5, 1e-4)}, {"unknown": 3}],
)
def test_measure_params_domain(params):
    with pytest.raises(ConfigError):
        load_config(overrides={"params": params})


def test_yaml_file_with_overrides(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("k: 5\nrerank_depth: 20\nparams:\n  gamma_hd: 0.5\n  atkinson_epsilon: 2\n")
    config = load_config(path, overrides={"k": 3, "params": {"gamma_hd": 0.7}, "seed": None})
    assert config.k == 3
    assert config.rerank_depth == 20
    assert config.params.gamma_hd == 0.7
    assert config.params.atkinson_epsilon == 2.0
    assert config.seed == 42


def test_json_config_must_be_mapping(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps([1, 2]))
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_hash_stable_and_sensitive():
    a = EvalConfig(k=5)
    b = EvalConfig(k=5)
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(EvalConfig(k=6))
    assert len(config_hash(a)) == 64


def test_scenario_spec():
    spec = build_model(ScenarioSpec, overrides={"scenario": "most_fair", "m": 3, "n": 5, "k": 2})
    assert spec.mode == "repeatable"
    with pytest.raises(ConfigError):
        build_model(ScenarioSpec, overrides={"scenario": "nope"})


def test_measure_params_frozen():
    params = MeasureParams()
    with pytest.raises(Exception):
        params.gamma_hd = 0.5
