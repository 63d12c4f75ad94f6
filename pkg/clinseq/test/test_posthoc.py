# -* encoding: utf-8 *-
import numpy as np
import pytest
from scipy.special import expit, logit

from clinseq.data import Dataset, train_val_test_split
from clinseq.data.synth import generate, COPY_TASK, SIGNAL_NOISE
from clinseq.plumbing.posthoc import EnsembleUncertainty, PlattCalibrator, interpret_global, interpret_instancewise
from clinseq.plumbing.posthoc.metrics import score
from clinseq.plumbing.predictors import SequenceModel
from clinseq.persist import load_model
from clinseq.primitives import Fold, Mode, MetricName, Task
from clinseq.test.helpers import with_problem, OffsetModel
from clinseq.utils import ContractError, DataError, ParameterError


def linear(model_dir: str = "tmp", **params: object) -> SequenceModel:
    defaults = dict(epoch=3, batch_size=16, learning_rate=2e-2, static_mode=Mode.NONE, time_mode=Mode.NONE,
                    model_path=model_dir)
    defaults.update(params)
    return SequenceModel("linear", **defaults)  # type: ignore


def test_calibration_keeps_the_ranking() -> None:
    rng = np.random.default_rng(0)
    y = (rng.random(500) < 0.4).astype(float)
    p = np.clip(0.3 * y + 0.7 * rng.random(500), 0.01, 0.99)
    calibrator = PlattCalibrator().fit(p, y)
    assert score(MetricName.AUC, y, calibrator.transform(p))[0] == pytest.approx(score(MetricName.AUC, y, p)[0])
    assert calibrator.a > 0


def test_calibration_undoes_overconfidence() -> None:
    rng = np.random.default_rng(1)
    p_true = rng.uniform(0.05, 0.95, size=20000)
    y = (rng.random(20000) < p_true).astype(float)
    overconfident = expit(3.0 * logit(p_true))
    calibrator = PlattCalibrator().fit(overconfident, y)
    assert calibrator.a == pytest.approx(1.0 / 3.0, abs=0.03)
    assert calibrator.b == pytest.approx(0.0, abs=0.05)
    np.testing.assert_allclose(calibrator(overconfident), p_true, atol=0.05)


def test_calibration_uses_only_masked_cells() -> None:
    p = np.array([0.2, 0.8, 0.3, 0.9])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    mask = np.array([1, 1, 0, 0])
    a = PlattCalibrator().fit(p, y, mask)
    b = PlattCalibrator().fit(p[:2], y[:2])
    assert (a.a, a.b) == pytest.approx((b.a, b.b))


def test_calibration_errors() -> None:
    with pytest.raises(ContractError):
        PlattCalibrator().transform(np.array([0.5]))
    with pytest.raises(DataError):
        PlattCalibrator().fit(np.array([0.2, 0.4]), np.array([1.0, 1.0]))
    with pytest.raises(DataError):
        PlattCalibrator().fit(np.array([0.2, 0.4]), np.array([0.0, 0.5]))
    with pytest.raises(ParameterError):
        PlattCalibrator().fit(np.array([0.2, 0.4]), np.array([0.0]))
    restored = PlattCalibrator.fromdict({"method": "platt", "a": 0.5, "b": 0.1})
    assert restored.todict() == {"method": "platt", "a": 0.5, "b": 0.1}


def test_ensemble_bounds(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task)
    ensemble = EnsembleUncertainty(linear(model_dir), K=3, seed=2, model_path=model_dir).fit(ds)
    assert len({m.seed for m in ensemble.members}) == 3
    est = ensemble.estimate(ds)
    shape = ds.labels.values.shape
    for array in (est.mean, est.std, est.half_width, est.lower, est.upper):
        assert array.shape == shape
    assert (est.std > 0).any()
    np.testing.assert_allclose(est.half_width, 1.959964 * est.std, rtol=1e-5)
    assert ((est.lower <= est.mean) & (est.mean <= est.upper)).all()
    assert ((est.lower >= 0) & (est.upper <= 1)).all()

    loaded = load_model(ensemble.save())
    np.testing.assert_allclose(loaded.estimate(ds).mean, est.mean)


def test_bootstrap_resamples_only_the_train_fold(copy_task: Dataset) -> None:
    ds = with_problem(copy_task)
    ensemble = EnsembleUncertainty(linear(), K=2)
    resampled = ensemble.member_dataset(ds, 0)
    assert resampled.n_instances == ds.n_instances
    for fold in (Fold.VAL, Fold.TEST):
        assert sorted(resampled.slice_fold(fold).ids) == sorted(ds.slice_fold(fold).ids)
    assert len(set(resampled.slice_fold(Fold.TRAIN).ids)) < len(ds.fold_indices(Fold.TRAIN))


def test_identical_members_have_no_spread(copy_task: Dataset, model_dir: str) -> None:
    ds = with_problem(copy_task, task=Task.REGRESSION, metric=MetricName.MSE)
    est = EnsembleUncertainty(OffsetModel(h=7, model_path=model_dir), K=2).fit(ds).estimate(ds)
    assert (est.std == 0).all()
    np.testing.assert_array_equal(est.lower, est.upper)
    valid = ds.labels.valid_mask == 1
    np.testing.assert_allclose(est.mean[valid], ds.labels.values[valid] + 2)


def test_ensemble_parameters() -> None:
    with pytest.raises(ParameterError):
        EnsembleUncertainty(linear(), K=1)
    with pytest.raises(ParameterError):
        EnsembleUncertainty(linear(), level=1.0)


def test_permuting_unread_features_changes_nothing(copy_task: Dataset) -> None:
    ds = with_problem(copy_task, task=Task.REGRESSION, metric=MetricName.MSE)
    model = OffsetModel(h=6).fit(ds)
    importance = interpret_global(model, ds, repeats=2)
    assert importance.feature_names == ["x0", "x1", "x2", "age", "admission_type"]
    np.testing.assert_array_equal(importance.scores, np.zeros(5))
    frame = importance.to_frame()
    assert list(frame.columns) == ["feature", "importance", "stderr"]
    with pytest.raises(ParameterError):
        interpret_global(model, ds, repeats=0)


@pytest.mark.slow
def test_permutation_importance_finds_the_signal(model_dir: str) -> None:
    train, _ = generate(SIGNAL_NOISE, n=200, n_test=10, T=6, D=5, lag=2, seed=4)
    ds = with_problem(train_val_test_split(train, 0.2, 0.2, seed=0), window=2)
    model = linear(model_dir, epoch=30).fit(ds)
    importance = interpret_global(model, ds.slice_fold(Fold.TEST), repeats=3, seed=1)
    assert {name for name, _ in importance.top(2)} == {"x0", "x1"}


def test_occlusion_importance(model_dir: str) -> None:
    train, _ = generate(COPY_TASK, n=40, n_test=5, T=6, D=2, lag=1, min_len=3, seed=8)
    ds = with_problem(train_val_test_split(train, 0.25, 0.0, seed=0), window=1)
    model = linear(model_dir).fit(ds)
    importance = interpret_instancewise(model, ds)
    assert importance.scores.shape == (ds.n_instances, ds.max_len, 2)
    assert importance.feature_names == ["x0", "x1"]
    padding = ~ds.temporal.valid_steps()
    assert (importance.scores[padding] == 0).all()
    assert (importance.scores[~padding] >= 0).all()

    # a per-step model only reacts to the occluded step
    at_two = interpret_instancewise(model, ds, target_step=2).scores
    assert (at_two[:, :2] == 0).all()
    assert (at_two[:, 3:] == 0).all()

    frame = importance.to_frame()
    assert list(frame.columns) == ["id", "step", "feature", "importance"]
    assert len(frame) == importance.scores.size
    with pytest.raises(ParameterError):
        interpret_instancewise(model, ds, target_step=6)
    with pytest.raises(ParameterError):
        interpret_instancewise(OffsetModel().fit(ds), ds)
