# -* encoding: utf-8 *-
import numpy as np
import pytest

from clinseq.data import assign_fold
from clinseq.data.synth import generate, COPY_TASK
from clinseq.plumbing.imputation import StaticImputer, TemporalImputer, Imputation, resolve_method, DataType
from clinseq.primitives import Fold
from clinseq.test.helpers import raw_dataset
from clinseq.utils import ParameterError

nan = np.nan


def test_linear_interpolation_is_exact_on_linear_series() -> None:
    time = np.array([[0.0, 1.0, 3.0, 4.0, 7.0]])
    series = 2.0 * time - 1.0
    values = series.copy()
    values[0, [1, 3]] = nan
    out = TemporalImputer("linear").fit_transform(raw_dataset(values[:, :, None], time=time))
    np.testing.assert_allclose(out.temporal.values[0, :, 0], series[0])


def test_spline_clamps_outside_the_observed_range() -> None:
    time = np.arange(7, dtype=float)[None, :]
    values = np.array([[nan, 1.0, 2.0, nan, 4.0, 5.0, nan]])
    out = TemporalImputer("cubic-spline").fit_transform(raw_dataset(values[:, :, None], time=time))
    filled = out.temporal.values[0, :, 0]
    assert filled[0] == 1.0
    assert filled[6] == 5.0
    # a natural spline through collinear points is the line itself
    assert filled[3] == pytest.approx(3.0)


def test_locf_carries_forward_then_backward() -> None:
    values = np.array([[nan, 3.0, nan, nan, 5.0]])
    out = TemporalImputer("locf").fit_transform(raw_dataset(values[:, :, None]))
    assert out.temporal.values[0, :, 0].tolist() == [3.0, 3.0, 3.0, 3.0, 5.0]
    assert (out.temporal.observed_mask == 1).all()


def test_padding_stays_unobserved() -> None:
    values = np.array([[[1.0], [nan], [nan]], [[nan], [2.0], [nan]]])
    out = TemporalImputer("median").fit_transform(raw_dataset(values, seq_len=[2, 3]))
    assert out.temporal.observed_mask[:, :, 0].tolist() == [[1, 1, 0], [1, 1, 1]]
    assert np.isnan(out.temporal.values[0, 2, 0])


def test_statistics_come_from_the_train_fold() -> None:
    values = np.array([[[1.0], [nan]], [[3.0], [nan]], [[100.0], [nan]]])
    ds = assign_fold(assign_fold(raw_dataset(values), Fold.TRAIN, [0, 1]), Fold.TEST, [2])
    out = TemporalImputer("mean").fit_transform(ds)
    assert out.temporal.values[:, 1, 0].tolist() == [2.0, 2.0, 2.0]


def test_series_without_observations_fall_back_to_the_median() -> None:
    values = np.array([[[1.0], [3.0]], [[nan], [nan]]])
    out = TemporalImputer("linear").fit_transform(raw_dataset(values))
    assert out.temporal.values[1, :, 0].tolist() == [2.0, 2.0]


def test_never_observed_feature_is_reported() -> None:
    values = np.array([[[1.0, nan]], [[2.0, nan]]])
    imputer = TemporalImputer("mean")
    out = imputer.fit_transform(raw_dataset(values))
    assert out.temporal.values[:, 0, 1].tolist() == [0.0, 0.0]
    assert len(imputer.warnings) == 1


@pytest.mark.parametrize("method", ["mean", "median", "knn", "mice-lite"])
def test_static_imputers_fill_every_cell(method: str) -> None:
    rng = np.random.default_rng(0)
    age = rng.normal(60, 10, size=30)
    static = np.stack([age, 2 * age + 1], axis=1)
    static[::4, 1] = nan
    imputer = Imputation(method, DataType.STATIC)
    out = imputer.fit_transform(raw_dataset(np.zeros((30, 1, 1)), static=static))
    assert (out.static.observed_mask == 1).all()
    assert np.isfinite(out.static.values).all()
    np.testing.assert_array_equal(out.static.values[1::4], static[1::4])


def test_mice_recovers_a_linear_relation() -> None:
    rng = np.random.default_rng(1)
    age = rng.normal(60, 10, size=50)
    static = np.stack([age, 2 * age + 1], axis=1)
    truth = static[::5, 1].copy()
    static[::5, 1] = nan
    out = StaticImputer("mice-lite").fit_transform(raw_dataset(np.zeros((50, 1, 1)), static=static))
    np.testing.assert_allclose(out.static.values[::5, 1], truth, rtol=1e-2)


def test_knn_averages_the_nearest_train_rows() -> None:
    static = np.array([[0.0, 10.0], [0.1, 12.0], [5.0, 50.0], [0.05, nan]])
    out = StaticImputer("knn", k=2).fit_transform(raw_dataset(np.zeros((4, 1, 1)), static=static))
    assert out.static.values[3, 1] == pytest.approx(11.0)


def test_categorical_static_columns_get_the_mode() -> None:
    static = np.array([[1.0], [1.0], [0.0], [nan]])
    ds = raw_dataset(np.zeros((4, 1, 1)), static=static).replace(static_categories={"s0": ["a", "b"]})
    assert StaticImputer("mean").fit_transform(ds).static.values[3, 0] == 1.0


def test_method_names() -> None:
    assert resolve_method("MICE", DataType.STATIC) == "mice-lite"
    assert resolve_method("spline", DataType.TEMPORAL) == "cubic-spline"
    with pytest.raises(ParameterError, match="not built-in"):
        TemporalImputer("gain")
    with pytest.raises(ParameterError):
        StaticImputer("locf")
    with pytest.raises(ParameterError):
        Imputation("mean", "relational")


@pytest.mark.parametrize("method", ["mean", "median", "locf", "linear", "cubic-spline"])
def test_temporal_imputers_keep_observed_cells_and_are_idempotent(method: str) -> None:
    raw, _ = generate(COPY_TASK, n=30, n_test=5, T=8, D=3, lag=1, missing_rate=0.4, min_len=2, seed=12)
    imputer = TemporalImputer(method)
    once = imputer.fit_transform(raw)
    observed = raw.temporal.observed_mask == 1
    np.testing.assert_array_equal(once.temporal.values[observed], raw.temporal.values[observed])
    valid = raw.temporal.valid_steps()
    assert np.isfinite(once.temporal.values[valid]).all()
    twice = imputer.transform(once)
    np.testing.assert_array_equal(twice.temporal.values[valid], once.temporal.values[valid])
