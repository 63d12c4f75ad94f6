# -* encoding: utf-8 *-
import json
import os
from typing import Any, Dict

import pandas as pd
import pytest

from clinseq.config import RunConfig
from clinseq.data.synth import synth, COPY_TASK
from clinseq.main import app
from clinseq.output import report, top_features
from clinseq.runner import run, METRICS_FILE, ERROR_FILE, CONFIG_FILE, PREDICTIONS_FILE, UNCERTAINTY_FILE, \
    GLOBAL_IMPORTANCE_FILE
from clinseq.utils import DataError, StageError


@pytest.fixture
def data_paths(tmp_path: Any) -> Dict[str, str]:
    return synth(COPY_TASK, str(tmp_path / "data"), name="tiny", n=40, n_test=10, T=6, D=2, lag=2,
                 missing_rate=0.1, seed=1)


def tiny(paths: Dict[str, str], **blocks: Any) -> Dict[str, Any]:
    document = {
        "seed": 4,
        "data": dict(paths, prob_val=0.25),
        "problem": {"max_seq_len": 6, "window": 2},
        "model": {"model_name": "linear", "epoch": 2, "batch_size": 8, "learning_rate": 1e-2},
        "evaluation": {"metrics": ["auc", "apr"]},
        "posthoc": {"uncertainty": True, "K": 2, "interpretation": ["global"], "permutation_repeats": 1},
    }  # type: Dict[str, Any]
    for name, block in blocks.items():
        document.setdefault(name, {}).update(block)
    return document


def test_same_seed_same_metrics(data_paths: Dict[str, str], tmp_path: Any) -> None:
    config = RunConfig(tiny(data_paths))
    first = run(config, str(tmp_path / "a"))
    run(config, str(tmp_path / "b"))
    for name in (METRICS_FILE, CONFIG_FILE, PREDICTIONS_FILE):
        with open(str(tmp_path / "a" / name), "rt", encoding="utf-8") as a, \
                open(str(tmp_path / "b" / name), "rt", encoding="utf-8") as b:
            assert a.read() == b.read()
    for name in (UNCERTAINTY_FILE, GLOBAL_IMPORTANCE_FILE):
        assert os.path.isfile(str(tmp_path / "a" / name))
    assert not os.path.exists(str(tmp_path / "a" / ERROR_FILE))

    assert first["seed"] == 4
    assert first["test_instances"] == 10
    assert first["requested_metrics"] == ["auc", "apr"]
    assert set(first["evaluation"]["metrics"]) == {"auc", "apr"}
    # the ensemble counts as one run, its members are nested inside it
    assert first["training_runs"] == [2]
    predictions = pd.read_csv(str(tmp_path / "a" / PREDICTIONS_FILE))
    assert set(predictions["id"]) <= set("p%05d" % i for i in range(40, 50))


def test_repeats_combine(data_paths: Dict[str, str], tmp_path: Any) -> None:
    config = RunConfig(tiny(data_paths, posthoc={"uncertainty": False, "interpretation": []})).override(repeats=2)
    document = run(config, str(tmp_path / "run"))
    assert document["repeats"] == 2
    assert document["training_runs"] == [1, 1]
    assert set(document["evaluation"]["std"]) == {"auc", "apr"}


def test_failed_stage_leaves_an_error_record(data_paths: Dict[str, str], tmp_path: Any) -> None:
    run_dir = str(tmp_path / "run")
    paths = dict(data_paths, temporal_train=str(tmp_path / "nowhere.csv"))
    with pytest.raises(StageError) as e:
        run(RunConfig(tiny(paths)), run_dir)
    assert e.value.stage == "load"
    assert not os.path.exists(os.path.join(run_dir, METRICS_FILE))
    with open(os.path.join(run_dir, ERROR_FILE), "rt", encoding="utf-8") as f:
        error = json.load(f)
    assert error["stage"] == "load"
    assert error["exitcode"] == 3
    assert "nowhere.csv" in error["message"]
    assert error["hint"]

    with pytest.raises(DataError, match="stage"):
        report(run_dir)


def test_a_successful_rerun_clears_the_error_record(data_paths: Dict[str, str], tmp_path: Any) -> None:
    run_dir = str(tmp_path / "run")
    with pytest.raises(StageError):
        run(RunConfig(tiny(data_paths, problem={"label_name": ["intubated"]})), run_dir)
    assert os.path.isfile(os.path.join(run_dir, ERROR_FILE))
    run(RunConfig(tiny(data_paths)), run_dir)
    assert not os.path.exists(os.path.join(run_dir, ERROR_FILE))
    assert os.path.isfile(os.path.join(run_dir, METRICS_FILE))


def test_app_exit_codes(data_paths: Dict[str, str], tmp_path: Any) -> None:
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(tiny(data_paths, model={"model_name": "lstm"})), encoding="utf-8")
    with pytest.raises(SystemExit) as e:
        app(["run", "--no-color", "-c", str(bad), "-o", str(tmp_path / "bad-run")])
    assert e.value.code == 2
    with open(str(tmp_path / "bad-run" / ERROR_FILE), "rt", encoding="utf-8") as f:
        assert json.load(f)["stage"] == "config"

    with pytest.raises(SystemExit) as e:
        app(["run", "--no-color"])
    assert e.value.code == 2


def test_run_and_report_through_the_app(data_paths: Dict[str, str], tmp_path: Any, capsys: Any) -> None:
    config = tmp_path / "config.json"
    config.write_text(json.dumps(tiny(data_paths)), encoding="utf-8")
    run_dir = str(tmp_path / "run")
    app(["run", "--no-color", "-c", str(config), "-o", run_dir, "--seed", "5"])
    with open(os.path.join(run_dir, CONFIG_FILE), "rt", encoding="utf-8") as f:
        assert json.load(f)["seed"] == 5

    capsys.readouterr()
    app(["report", "--no-color", run_dir, "--rows", "3", "--top-k", "2"])
    out = capsys.readouterr().out
    assert "Performance" in out
    assert "Predictions (3 of" in out
    assert "Permutation importance (top 2)" in out
    assert "Uncertainty" in out


def test_synth_through_the_app(tmp_path: Any) -> None:
    out_dir = str(tmp_path / "synth")
    app(["synth", "--no-color", "treatment-rule", out_dir, "--name", "demo", "-n", "8", "-T", "4", "-D", "1",
         "--lag", "1"])
    assert sorted(os.listdir(out_dir)) == [
        "demo_static_test_data.csv.gz", "demo_static_train_data.csv.gz",
        "demo_temporal_test_data_eav.csv.gz", "demo_temporal_train_data_eav.csv.gz",
    ]


def test_top_features_averages_instancewise_scores() -> None:
    frame = pd.DataFrame({
        "id": ["a", "a", "b", "b"],
        "step": [0, 0, 0, 0],
        "feature": ["x0", "x1", "x0", "x1"],
        "importance": [1.0, -4.0, 3.0, 2.0],
    })
    top = top_features(frame, 1)
    assert list(top["feature"]) == ["x1"]
    assert list(top["importance"]) == [3.0]


def test_top_features_ties_keep_the_listed_order() -> None:
    frame = pd.DataFrame({
        "id": ["a", "a", "b", "b"],
        "step": [0, 0, 0, 0],
        "feature": ["x0", "x1", "x0", "x1"],
        "importance": [1.0, -4.0, 3.0, 0.0],
    })
    assert list(top_features(frame, 2)["feature"]) == ["x0", "x1"]
    assert list(top_features(frame.iloc[::-1], 2)["feature"]) == ["x1", "x0"]
