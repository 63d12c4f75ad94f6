# -* encoding: utf-8 *-
import json
from typing import Any, Dict

import pytest

from clinseq.config import RunConfig
from clinseq.primitives import FallbackDict
from clinseq.utils import ConfigError


def minimal(**blocks: Any) -> Dict[str, Any]:
    document = {
        "data": {"static_train": "s.csv", "temporal_train": "t.csv", "prob_test": 0.2},
    }  # type: Dict[str, Any]
    for name, block in blocks.items():
        if isinstance(block, dict):
            document.setdefault(name, {}).update(block)
        else:
            document[name] = block
    return document


def test_defaults_fill_unnamed_keys() -> None:
    config = RunConfig(minimal(model={"h_dim": 8})).validate()
    assert config["model"]["h_dim"] == 8
    assert config["model"]["model_name"] == "gru"
    assert config["problem"]["window"] == 4
    assert config.seed == 0
    assert config.metrics == ["auc"]
    resolved = config.resolved()
    assert resolved["data"]["prob_val"] == 0.2
    assert resolved["automl"]["mode"] == "none"
    assert json.loads(config.tojson()) == resolved


def test_unknown_keys() -> None:
    with pytest.raises(ConfigError) as e:
        RunConfig({"modle": {}})
    assert e.value.exitcode == 2
    with pytest.raises(ConfigError):
        RunConfig(minimal(model={"hdim": 8}))
    with pytest.raises(ConfigError):
        RunConfig({"model": ["gru"]})


@pytest.mark.parametrize("blocks", [
    {"data": {"static_train": None}},
    {"data": {"prob_val": 0.6, "prob_test": 0.5}},
    {"data": {"prob_test": 0.0}},
    {"data": {"static_test": "s2.csv", "temporal_test": "t2.csv"}},
    {"data": {"static_test": "s2.csv"}},
    {"preprocessing": {"normalization": "zscore"}},
    {"imputation": {"temporal": "nearest"}},
    {"evaluation": {"metrics": ["mse"]}},
    {"evaluation": {"average": "weighted"}},
    {"model": {"model_name": "lstm"}},
    {"problem": {"trigger_step": 3}},
    {"problem": {"treatment": ["treatment"]}, "model": {"model_name": "linear"}},
    {"problem": {"treatment": ["treatment"], "problem": "one-shot"}},
    {"feature_selection": {"temporal_method": "greedy-addition"}},
    {"feature_selection": {"static_method": "lasso", "static_number": 1}},
    {"posthoc": {"uncertainty": True, "K": 1}},
    {"posthoc": {"level": 1.0}},
    {"posthoc": {"calibration": True}, "problem": {"task": "regression", "metric_name": "mse"}},
    {"posthoc": {"interpretation": ["shap"]}},
    {"posthoc": {"interpretation": ["instancewise"]}, "automl": {"mode": "sash"}},
    {"sensing": {"policy": "asac"}},
    {"sensing": {"policy": "randomize", "budget": 0.0}},
    {"sensing": {"policy": "randomize"}, "automl": {"mode": "hpo"}},
    {"sensing": {"policy": "greedy-voi"}},
    {"automl": {"mode": "bayes"}},
    {"automl": {"mode": "hpo", "num_iter": 0}},
    {"automl": {"mode": "hpo", "method": "tpe"}},
    {"automl": {"mode": "hpo"}, "data": {"prob_val": 0.0}},
    {"automl": {"mode": "sms"}, "problem": {"problem": "one-shot"}},
    {"repeats": 0},
])
def test_invalid_configurations(blocks: Dict[str, Any]) -> None:
    with pytest.raises(ConfigError):
        RunConfig(minimal(**blocks)).validate()


def test_valid_combinations() -> None:
    RunConfig(minimal(data={"prob_test": 0.0, "static_test": "s2.csv", "temporal_test": "t2.csv"})).validate()
    RunConfig(minimal(problem={"problem": "one-shot", "trigger_step": 5})).validate()
    RunConfig(minimal(problem={"treatment": ["treatment"]}, model={"model_name": "rnn"})).validate()
    RunConfig(minimal(posthoc={"uncertainty": True, "calibration": True, "interpretation": ["global"]},
                      sensing={"policy": "greedy-voi", "budget": 0.3})).validate()
    RunConfig(minimal(feature_selection={"temporal_method": "greedy-addition", "temporal_number": 2})).validate()
    RunConfig(minimal(automl={"mode": "spsc", "num_iter": 3, "method": "random"})).validate()


def test_override() -> None:
    config = RunConfig(minimal(seed=3))
    overridden = config.override(seed=7, output="elsewhere", automl_mode="hpo", num_iter=4, repeats=None)
    assert (overridden.seed, overridden.output, overridden.repeats) == (7, "elsewhere", 1)
    assert overridden.automl_mode == "hpo"
    assert overridden["automl"]["num_iter"] == 4
    assert config.seed == 3
    with pytest.raises(ConfigError):
        config.override(epochs=2)


def test_from_module() -> None:
    config = RunConfig.from_module("clinseq.test.configs.tutorial").validate()
    assert config.output == "tutorial-run"
    assert config["model"]["h_dim"] == 16
    assert config.metrics == ["auc", "apr"]
    with pytest.raises(ConfigError):
        RunConfig.from_module("clinseq.test.configs.missing")
    with pytest.raises(ConfigError):
        RunConfig.from_module("clinseq.test.configs.tutorial:run")


def test_from_json(tmp_path: Any) -> None:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(minimal(seed=5)), encoding="utf-8")
    assert RunConfig.from_json(str(path)).seed == 5

    frozen = tmp_path / "frozen.json"
    frozen.write_text(RunConfig.from_json(str(path)).tojson(), encoding="utf-8")
    assert RunConfig.from_json(str(frozen)).resolved() == RunConfig.from_json(str(path)).resolved()

    with pytest.raises(ConfigError):
        RunConfig.from_json(str(tmp_path / "nope.json"))
    (tmp_path / "broken.json").write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_json(str(tmp_path / "broken.json"))
    (tmp_path / "list.json").write_text("[]", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_json(str(tmp_path / "list.json"))


def test_fallback_dict_layers_over_defaults() -> None:
    defaults = {"a": 1, "b": 2}
    d = FallbackDict(update_with={"b": 3, "c": 4}, fallback_on=defaults)
    assert (d["a"], d["b"], d["c"], d["z"]) == (1, 3, 4, None)
    assert d.unknown_keys() == ["c"]
    assert d.resolved() == {"a": 1, "b": 3, "c": 4}
    assert defaults == {"a": 1, "b": 2}
