# -* encoding: utf-8 *-
import numpy as np
import pytest

from clinseq.data import Dataset, ProblemSpec, assign_fold
from clinseq.plumbing.imputation import StaticImputer, TemporalImputer
from clinseq.plumbing.preprocessing import FilterNegative, OneHotEncoder, Normalizer, ProblemMaker, compose
from clinseq.primitives import Fold, Task, MetricName
from clinseq.test.helpers import raw_dataset
from clinseq.utils import ContractError, ParameterError, DataError


def _cohort() -> Dataset:
    values = np.arange(2 * 5 * 2, dtype=float).reshape(2, 5, 2)
    values[:, :, 1] = [[0, 1, 0, 1, 1], [1, 1, 0, 0, 1]]
    return raw_dataset(values, names=["hr", "ventilator"])


@pytest.mark.parametrize("component", [
    FilterNegative(),
    OneHotEncoder([]),
    Normalizer("standard"),
    StaticImputer("mean"),
    TemporalImputer("locf"),
    ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=5, window=1)),
])
def test_transform_before_fit_is_refused(component) -> None:
    with pytest.raises(ContractError):
        component.transform(_cohort())


@pytest.mark.parametrize("make", [
    lambda: Normalizer("minmax", exclude=["ventilator"]),
    lambda: TemporalImputer("linear"),
    lambda: ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=4, window=1)),
])
def test_fit_transform_equals_fit_then_transform(make) -> None:
    ds = _cohort()
    ds.temporal.values[0, 2, 0] = np.nan
    ds.temporal.observed_mask[0, 2, 0] = 0
    a = make().fit_transform(ds)
    b = make().fit(ds).transform(ds)
    np.testing.assert_array_equal(a.temporal.values, b.temporal.values)
    np.testing.assert_array_equal(a.temporal.observed_mask, b.temporal.observed_mask)


def test_filter_negative_masks_measurements_but_not_categories() -> None:
    ds = raw_dataset(np.array([[[-1.0], [2.0]]]), static=np.array([[-3.0, 1.0]]))
    ds = ds.replace(static_categories={"s1": ["a", "b"]})
    out = FilterNegative().fit_transform(ds)
    assert out.temporal.observed_mask[0, :, 0].tolist() == [0, 1]
    assert np.isnan(out.temporal.values[0, 0, 0])
    assert out.static.observed_mask[0].tolist() == [0, 1]


def test_one_hot_uses_train_categories() -> None:
    ds = raw_dataset(np.zeros((3, 1, 1)), static=np.array([[0.0], [1.0], [2.0]]))
    ds = ds.replace(static_categories={"s0": ["icu", "er", "ward"]})
    ds = assign_fold(assign_fold(ds, Fold.TRAIN, [0, 1]), Fold.TEST, [2])
    out = OneHotEncoder(["s0"]).fit_transform(ds)
    assert out.static_names == ["s0_er", "s0_icu"]
    # a category unseen in training encodes as all zeros
    assert out.static.values.tolist() == [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]]
    assert "s0" not in out.static_categories
    with pytest.raises(ParameterError):
        OneHotEncoder(["nope"]).fit(ds)


def test_normalizer_learns_from_train_rows_only() -> None:
    values = np.array([[[0.0]], [[10.0]], [[100.0]]])
    ds = assign_fold(assign_fold(raw_dataset(values), Fold.TRAIN, [0, 1]), Fold.TEST, [2])
    out = Normalizer("minmax").fit_transform(ds)
    assert out.temporal.values[:, 0, 0].tolist() == [0.0, 1.0, 10.0]
    standard = Normalizer("standard").fit_transform(ds)
    assert standard.temporal.values[:, 0, 0].tolist() == [-1.0, 1.0, 19.0]
    assert Normalizer("none").fit_transform(ds) is ds
    with pytest.raises(ParameterError):
        Normalizer("zscore")


def test_normalizer_leaves_excluded_and_categorical_features() -> None:
    ds = raw_dataset(np.array([[[1.0, 5.0]], [[3.0, 7.0]]]), names=["hr", "ventilator"],
                     static=np.array([[0.0], [2.0]]))
    ds = ds.replace(static_categories={"s0": ["a", "b", "c"]})
    out = Normalizer("minmax", exclude=["ventilator"]).fit_transform(ds)
    assert out.temporal.values[:, 0, 1].tolist() == [5.0, 7.0]
    assert out.temporal.values[:, 0, 0].tolist() == [0.0, 1.0]
    assert out.static.values[:, 0].tolist() == [0.0, 2.0]


def test_online_labels_are_shifted_by_the_window() -> None:
    ds = _cohort()
    out = ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=5, window=2)).fit_transform(ds)
    assert out.temporal_names == ["hr"]
    assert out.labels.values.shape == (2, 5, 1)
    # the label at t is the label feature at t + 2; the last two steps have no target
    assert out.labels.valid_mask[0, :, 0].tolist() == [1, 1, 1, 0, 0]
    assert out.labels.values[0, :3, 0].tolist() == [0.0, 1.0, 1.0]
    assert out.labels.values[1, :3, 0].tolist() == [0.0, 0.0, 1.0]


def test_window_zero_is_the_label_feature_itself() -> None:
    ds = _cohort()
    out = ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=5, window=0)).fit_transform(ds)
    np.testing.assert_array_equal(out.labels.values[:, :, 0], ds.temporal.values[:, :, 1])
    assert (out.labels.valid_mask == 1).all()


def test_long_sequences_keep_the_most_recent_steps() -> None:
    ds = _cohort()
    out = ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=3, window=0)).fit_transform(ds)
    assert out.temporal.values[0, :, 0].tolist() == ds.temporal.values[0, 2:, 0].tolist()
    assert list(out.temporal.seq_len) == [3, 3]


def test_one_shot_trigger_cuts_the_inputs() -> None:
    ds = _cohort()
    spec = ProblemSpec(problem="one-shot", label_names=["ventilator"], max_seq_len=5, window=0)
    out = ProblemMaker(spec, trigger_step=2).fit_transform(ds)
    assert list(out.temporal.seq_len) == [2, 2]
    # last observed label value from the trigger step on
    assert out.labels.values[:, 0].tolist() == [1.0, 1.0]
    with pytest.raises(ParameterError):
        ProblemMaker(ProblemSpec(label_names=["ventilator"], max_seq_len=5, window=0), trigger_step=2)


def test_problem_maker_checks_names_and_label_values() -> None:
    ds = _cohort()
    with pytest.raises(ParameterError):
        ProblemMaker(ProblemSpec(label_names=["mortality"], max_seq_len=5, window=1)).fit(ds)
    spec = ProblemSpec(label_names=["hr"], max_seq_len=5, window=1)
    with pytest.raises(DataError):
        ProblemMaker(spec).fit_transform(ds)
    regression = ProblemSpec(label_names=["hr"], max_seq_len=5, window=1, task=Task.REGRESSION,
                             metric=MetricName.MSE)
    assert ProblemMaker(regression).fit_transform(ds).labels.values[0, 0, 0] == 2.0


@pytest.mark.parametrize("kwargs", [
    dict(window=5, max_seq_len=5),
    dict(window=-1),
    dict(problem="sometimes"),
    dict(metric=MetricName.MSE),
    dict(treatment_names=["ventilator"]),
])
def test_problem_spec_validation(kwargs) -> None:
    args = dict(label_names=["ventilator"])
    args.update(kwargs)
    with pytest.raises(ParameterError):
        ProblemSpec(**args)


def test_composed_pipeline_threads_the_dataset() -> None:
    ds = _cohort()
    ds.temporal.values[1, 0, 0] = -5.0
    pipe = compose([FilterNegative(), Normalizer("minmax", exclude=["ventilator"]), TemporalImputer("locf")])
    out = pipe.fit_transform(ds)
    assert out.temporal.observed_mask[1, 0, 0] == 1
    assert out.temporal.values[1, 0, 0] == out.temporal.values[1, 1, 0]
    np.testing.assert_array_equal(pipe.transform(ds).temporal.values, out.temporal.values)
    fresh = pipe.new()
    with pytest.raises(ContractError):
        fresh.transform(ds)
