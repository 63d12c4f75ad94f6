# -* encoding: utf-8 *-
import gzip

import numpy as np
import pytest

from clinseq.data import Dataset, StaticMatrix, load_csv, write_csv, concat, assign_fold, train_val_test_split, \
    label_steps, collapse_steps
from clinseq.primitives import Fold
from clinseq.test.helpers import raw_dataset, with_problem
from clinseq.utils import DataError, ContractError, ParameterError


def test_split_sizes_follow_largest_remainder() -> None:
    ds = raw_dataset(np.zeros((10, 3, 1)))
    split = train_val_test_split(ds, 0.25, 0.25, seed=1)
    # 5 / 2.5 / 2.5: the remainders tie and go to the earlier fold
    assert len(split.fold_indices(Fold.TRAIN)) == 5
    assert len(split.fold_indices(Fold.VAL)) == 3
    assert len(split.fold_indices(Fold.TEST)) == 2


def test_split_is_deterministic_per_seed() -> None:
    ds = raw_dataset(np.zeros((40, 2, 1)))
    a = train_val_test_split(ds, 0.2, 0.2, seed=7).fold
    b = train_val_test_split(ds, 0.2, 0.2, seed=7).fold
    c = train_val_test_split(ds, 0.2, 0.2, seed=8).fold
    assert (a == b).all()
    assert (a != c).any()


def test_split_refuses_assigned_folds_and_bad_fractions() -> None:
    ds = train_val_test_split(raw_dataset(np.zeros((4, 2, 1))), 0.5, 0.0)
    with pytest.raises(ParameterError):
        train_val_test_split(ds, 0.5, 0.0)
    with pytest.raises(ParameterError):
        train_val_test_split(raw_dataset(np.zeros((4, 2, 1))), 0.7, 0.5)


def test_fit_rows_prefer_train_fold() -> None:
    ds = raw_dataset(np.zeros((4, 2, 1)))
    assert list(ds.fit_rows()) == [0, 1, 2, 3]
    ds = assign_fold(ds, Fold.TEST)
    ds = assign_fold(ds, Fold.TRAIN, [1, 2])
    assert list(ds.fit_rows()) == [1, 2]
    # only test rows assigned: nothing to learn from
    assert list(assign_fold(ds, Fold.TEST).fit_rows()) == []


def test_dataset_shape_checks() -> None:
    ds = raw_dataset(np.zeros((3, 2, 2)))
    with pytest.raises(DataError):
        ds.replace(temporal_names=["only-one"])
    with pytest.raises(DataError):
        ds.replace(fold=np.zeros(2))


def test_csv_round_trip(tmp_path) -> None:
    values = np.array([[[1.0, np.nan], [2.0, 5.0], [np.nan, np.nan]],
                       [[3.0, 4.0], [np.nan, np.nan], [np.nan, np.nan]]])
    ds = raw_dataset(values, seq_len=[2, 1], names=["hr", "spo2"], static=np.array([[60.0], [np.nan]]))
    static_path, temporal_path = str(tmp_path / "s.csv.gz"), str(tmp_path / "t.csv.gz")
    write_csv(ds, static_path, temporal_path)
    with gzip.open(temporal_path, "rt") as f:
        assert f.readline().strip() == "id,time,variable,value"

    back = load_csv(static_path, temporal_path)
    assert list(back.ids) == ["i0", "i1"]
    assert back.temporal_names == ["hr", "spo2"]
    assert list(back.temporal.seq_len) == [2, 1]
    assert back.static.observed_mask.tolist() == [[1], [0]]
    assert (back.temporal.observed_mask == ds.temporal.observed_mask[:, :2]).all()
    np.testing.assert_array_equal(np.nan_to_num(back.temporal.values), np.nan_to_num(ds.temporal.values[:, :2]))


def test_loader_time_grid_is_per_instance(tmp_path) -> None:
    (tmp_path / "s.csv").write_text("id,sex\na,f\nb,m\n")
    (tmp_path / "t.csv").write_text("id,time,variable,value\n"
                                    "a,5,hr,80\na,1,hr,70\nb,2,hr,90\na,5,bp,120\n")
    ds = load_csv(str(tmp_path / "s.csv"), str(tmp_path / "t.csv"))
    assert ds.temporal_names == ["hr", "bp"]
    assert list(ds.temporal.seq_len) == [2, 1]
    assert ds.temporal.time[0].tolist() == [1.0, 5.0]
    assert ds.temporal.values[0, 1, 1] == 120.0
    assert ds.temporal.observed_mask[0, 0, 1] == 0
    assert ds.static_categories == {"sex": ["f", "m"]}


@pytest.mark.parametrize("static,temporal", [
    ("id,age\na,1\na,2\n", "id,time,variable,value\n"),
    ("id,age\na,1\n", "id,time,variable,value\nb,0,hr,1\n"),
    ("id,age\na,1\n", "id,time,variable,value\na,0,hr,x\n"),
    ("id,age\na,1\n", "id,time,variable,value\na,0,hr,1\na,0,hr,2\n"),
    ("id,age\na,1\n", "patient,time,variable,value\n"),
])
def test_loader_rejects_malformed_files(tmp_path, static: str, temporal: str) -> None:
    (tmp_path / "s.csv").write_text(static)
    (tmp_path / "t.csv").write_text(temporal)
    with pytest.raises(DataError):
        load_csv(str(tmp_path / "s.csv"), str(tmp_path / "t.csv"))


def test_loader_reports_missing_file(tmp_path) -> None:
    with pytest.raises(DataError):
        load_csv(str(tmp_path / "nope.csv"), str(tmp_path / "nope.csv"))


def test_concat_aligns_columns_and_categories() -> None:
    first = raw_dataset(np.ones((2, 3, 2)), names=["a", "b"], ids=["x", "y"])
    first = first.replace(static=StaticMatrix(np.array([[0.0], [1.0]]), np.ones((2, 1))),
                          static_names=["ward"], static_categories={"ward": ["icu", "er"]})
    second = raw_dataset(np.stack([np.full((1, 2), 2.0), np.full((1, 2), 3.0)], axis=2), names=["b", "a"],
                         ids=["z"])
    second = second.replace(static=StaticMatrix(np.array([[1.0]]), np.ones((1, 1))),
                            static_names=["ward"], static_categories={"ward": ["ward7", "icu"]})
    second = assign_fold(second, Fold.TEST)

    both = concat(first, second)
    assert list(both.ids) == ["x", "y", "z"]
    assert both.max_len == 3
    # columns reordered to the first dataset's names
    assert both.temporal.values[2, 0].tolist() == [3.0, 2.0]
    # padded steps are unobserved
    assert both.temporal.observed_mask[2, 2].tolist() == [0, 0]
    # "icu" keeps its code, unseen "ward7" is appended
    assert both.static_categories["ward"] == ["icu", "er", "ward7"]
    assert both.static.values[2, 0] == 0.0
    assert both.fold.tolist() == [Fold.UNASSIGNED, Fold.UNASSIGNED, Fold.TEST]


def test_concat_rejects_overlaps_and_mismatches() -> None:
    a = raw_dataset(np.ones((1, 2, 1)), ids=["x"])
    with pytest.raises(DataError):
        concat(a, raw_dataset(np.ones((1, 2, 1)), ids=["x"]))
    with pytest.raises(DataError):
        concat(a, raw_dataset(np.ones((1, 2, 1)), names=["other"], ids=["y"]))
    labelled = with_problem(raw_dataset(np.zeros((2, 4, 2)), names=["f", "ventilator"], ids=["p", "q"]), window=1)
    with pytest.raises(ContractError):
        concat(a, labelled)


def test_one_shot_labels_sit_at_the_last_step() -> None:
    values = np.zeros((2, 4, 2))
    values[:, :, 1] = [[0, 0, 1, 1], [0, 1, 0, 0]]
    ds = with_problem(raw_dataset(values, seq_len=[4, 3], names=["f", "ventilator"]), problem="one-shot",
                      window=0)
    assert ds.labels.values[:, 0].tolist() == [1.0, 0.0]
    Y, M = label_steps(ds)
    assert M[:, :, 0].tolist() == [[0, 0, 0, 1], [0, 0, 1, 0]]
    steps = np.arange(8, dtype=float).reshape(2, 4, 1)
    assert collapse_steps(steps, ds)[:, 0].tolist() == [3.0, 6.0]


def test_require_problem() -> None:
    with pytest.raises(ContractError):
        raw_dataset(np.zeros((1, 1, 1))).require_problem()
    assert isinstance(raw_dataset(np.zeros((1, 1, 1))), Dataset)
