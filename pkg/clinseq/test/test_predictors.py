# -* encoding: utf-8 *-
import os

import numpy as np
import pytest

from clinseq.data import Dataset
from clinseq.plumbing.posthoc import evaluate
from clinseq.plumbing.predictors import SequenceModel, check_model_type, get_hyperparameter_space, load_model
from clinseq.primitives import Mode, Fold, MetricName
from clinseq.test.helpers import with_problem
from clinseq.utils import ContractError, ParameterError, DataError


def small_model(model_dir: str, **params: object) -> SequenceModel:
    defaults = dict(model_type="gru", h_dim=4, epoch=2, batch_size=16, learning_rate=1e-2, model_path=model_dir)
    defaults.update(params)
    return SequenceModel(**defaults)  # type: ignore


def test_model_classes() -> None:
    assert check_model_type("GRU") == "gru"
    with pytest.raises(ParameterError, match="not built-in"):
        check_model_type("lstm")
    with pytest.raises(ParameterError):
        check_model_type("xgboost")
    assert "ridge" in get_hyperparameter_space("linear").names
    assert "h_dim" in get_hyperparameter_space("rnn").names


def test_parameter_checks() -> None:
    with pytest.raises(ParameterError):
        SequenceModel(h_dim=0)
    with pytest.raises(ParameterError):
        SequenceModel(learning_rate=0.0)
    with pytest.raises(ParameterError):
        SequenceModel(static_mode="attend")


def test_predict_before_fit_is_refused(copy_task: Dataset) -> None:
    with pytest.raises(ContractError):
        SequenceModel().predict(with_problem(copy_task))


@pytest.mark.parametrize("model_type", ["linear", "rnn", "gru"])
def test_prediction_shapes(copy_task: Dataset, model_dir: str, model_type: str) -> None:
    ds = with_problem(copy_task)
    model = small_model(model_dir, model_type=model_type).fit(ds)
    out = model.predict(ds)
    assert out.shape == ds.labels.values.shape
    assert ((out >= 0) & (out <= 1)).all()
    assert len(model.history) == 2
    assert "val_score" in model.history[0]


def test_one_shot_predictions_are_per_instance(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task, problem="one-shot", window=0)
    out = small_model(model_dir).fit(ds).predict(ds)
    assert out.shape == (ds.n_instances, 1)


def test_regression_outputs_are_unbounded(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task, label="x0", task="regression", metric=MetricName.MSE)
    out = small_model(model_dir, model_type="linear", epoch=1).fit(ds).predict_steps(ds)
    assert out.shape == (ds.n_instances, ds.max_len, 1)


def test_input_layout(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    model = small_model(model_dir, epoch=1).fit(ds)
    assert model.layout.channel_names == ["x0", "x1", "x2", "age", "admission_type", "delta_t"]
    bare = small_model(model_dir, epoch=1, static_mode=Mode.NONE, time_mode=Mode.NONE,
                       input_features=["x0"]).fit(ds)
    assert bare.layout.channel_names == ["x0"]
    assert bare.inputs(ds).shape == (ds.n_instances, ds.max_len, 1)
    with pytest.raises(ParameterError):
        small_model(model_dir, input_features=["ventilator"]).fit(ds)


def test_padding_predicts_zero(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    short = ds.replace(temporal=ds.temporal.copy())
    short.temporal.seq_len[:] = 5
    out = small_model(model_dir, epoch=1).fit(ds).predict_steps(short)
    assert (out[:, 5:] == 0).all()


def test_fitting_needs_train_rows(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    only_test = ds.replace(fold=np.full(ds.n_instances, Fold.TEST))
    with pytest.raises(DataError):
        small_model(model_dir).fit(only_test)


def test_saved_models_predict_the_same(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    model = small_model(model_dir, model_id="saved").fit(ds)
    path = model.save()
    assert os.path.dirname(path) == model_dir
    for loaded in (SequenceModel.load(path), load_model(path)):
        np.testing.assert_array_equal(loaded.predict(ds), model.predict(ds))
        assert loaded.layout.channel_names == model.layout.channel_names


def test_same_seed_same_model(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    a = small_model(model_dir, seed=4).fit(ds).predict(ds)
    b = small_model(model_dir, seed=4).fit(ds).predict(ds)
    np.testing.assert_array_equal(a, b)


@pytest.mark.slow
@pytest.mark.parametrize("model_type", ["linear", "gru"])
def test_copy_task_is_learned(copy_task: Dataset, model_dir: str, model_type: str) -> None:
    # window equals the generator lag, so the label at step t is 1[x0[t] > 0]
    ds = with_problem(copy_task, window=2)
    model = SequenceModel(model_type, h_dim=16, epoch=60, batch_size=8, learning_rate=2e-2,
                          static_mode=Mode.NONE, model_path=model_dir).fit(ds)
    test = ds.slice_fold(Fold.TEST)
    assert evaluate(test, model.predict(test))[MetricName.AUC] > 0.95
