# -* encoding: utf-8 *-
# Loads the on-disk dataset pair: a wide static file (``id,<feature>,...``) and a long EAV temporal file
# (``id,time,variable,value``). Both may be gzip-compressed (detected by the ``.gz`` suffix).
from typing import List, Dict, Tuple

import numpy as np
import pandas as pd

from clinseq.data import Dataset, StaticMatrix, TemporalTensor
from clinseq.utils import DataError, ContractError, highlight, print_debug

TEMPORAL_HEADER = ["id", "time", "variable", "value"]


def _read(path: str) -> pd.DataFrame:
    # header=None makes the header line fix the column count, so long rows fail instead of becoming an index
    try:
        raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise DataError("Data file %s does not exist" % highlight(path))
    except pd.errors.EmptyDataError:
        raise DataError("Data file %s is empty" % highlight(path))
    except (pd.errors.ParserError, UnicodeDecodeError, EOFError, OSError) as e:
        raise DataError("Can't parse %s: %s" % (highlight(path), str(e)))

    header = [str(c) for c in raw.iloc[0]]
    if len(set(header)) != len(header):
        raise DataError("%s has duplicate column names" % highlight(path))
    df = raw.iloc[1:].reset_index(drop=True)
    df.columns = header
    return df


def _check_complete_rows(df: pd.DataFrame, path: str) -> None:
    # pandas pads short rows with NaN
    short = df.isna().any(axis=1).to_numpy()
    if short.any():
        line = int(np.flatnonzero(short)[0]) + 2
        raise DataError("%s line %s: wrong number of columns (expected %s)" %
                        (highlight(path), line, len(df.columns)))


def _parse_floats(column: pd.Series, name: str, path: str) -> np.ndarray:
    try:
        values = column.astype(float).to_numpy()
    except ValueError:
        values = None
    if values is not None and np.isfinite(values).all():
        return values

    for i, raw in enumerate(column):
        try:
            if not np.isfinite(float(raw)):
                raise ValueError(raw)
        except ValueError:
            raise DataError("%s line %s: can't parse %s value %s as a number" %
                            (highlight(path), i + 2, name, highlight(repr(raw))))
    return column.map(float).to_numpy(dtype=float)


def _static_column(raw: pd.Series) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Parses one static column. Numeric columns become floats, anything else becomes category codes in first-
    appearance order. Empty cells are missing.
    """
    present = (raw != "").to_numpy()
    try:
        parsed = raw[present].astype(float).to_numpy()
        numeric = bool(np.isfinite(parsed).all())
    except ValueError:
        numeric = False

    values = np.full(len(raw), np.nan)
    if numeric:
        values[present] = parsed
        return values, present.astype(np.int8), []

    codes, categories = pd.factorize(raw[present], sort=False)
    values[present] = codes
    return values, present.astype(np.int8), [str(c) for c in categories]


def load_static(path: str) -> Tuple[List[str], List[str], StaticMatrix, Dict[str, List[str]]]:
    df = _read(path)
    if not len(df.columns) or df.columns[0] != "id":
        raise DataError("Static file %s must start with an %s column" % (highlight(path), highlight("id")))
    _check_complete_rows(df, path)

    ids = df["id"].tolist()
    dupes = df["id"].duplicated().to_numpy()
    if dupes.any():
        line = int(np.flatnonzero(dupes)[0]) + 2
        raise DataError("%s line %s: duplicate id %s" % (highlight(path), line, highlight(ids[line - 2])))

    names = [str(c) for c in df.columns[1:]]
    values = np.full((len(df), len(names)), np.nan)
    mask = np.zeros((len(df), len(names)), dtype=np.int8)
    categories = {}  # type: Dict[str, List[str]]
    for j, name in enumerate(names):
        values[:, j], mask[:, j], cats = _static_column(df[name])
        if cats:
            categories[name] = cats
    return ids, names, StaticMatrix(values, mask), categories


def load_temporal(path: str, ids: List[str]) -> Tuple[List[str], TemporalTensor]:
    df = _read(path)
    if [str(c) for c in df.columns] != TEMPORAL_HEADER:
        raise DataError("Temporal file %s must have the header %s, not %s" %
                        (highlight(path), highlight(",".join(TEMPORAL_HEADER)), ",".join(map(str, df.columns))))
    _check_complete_rows(df, path)

    index = {k: i for i, k in enumerate(ids)}
    inst = df["id"].map(index)
    unknown = inst.isna().to_numpy()
    if unknown.any():
        line = int(np.flatnonzero(unknown)[0]) + 2
        raise DataError("%s line %s: id %s does not appear in the static file" %
                        (highlight(path), line, highlight(df["id"].iloc[line - 2])))

    time = _parse_floats(df["time"], "time", path)
    value = _parse_floats(df["value"], "value", path)
    var_codes, variables = pd.factorize(df["variable"], sort=False)

    rows = pd.DataFrame({"inst": inst.to_numpy(dtype=int), "time": time, "var": var_codes})
    dupes = rows.duplicated(["inst", "time", "var"]).to_numpy()
    if dupes.any():
        i = int(np.flatnonzero(dupes)[0])
        raise DataError("%s line %s: duplicate measurement (id=%s, time=%s, variable=%s)" %
                        (highlight(path), i + 2, df["id"].iloc[i], df["time"].iloc[i], df["variable"].iloc[i]))

    n, d = len(ids), len(variables)
    if len(rows):
        step = (rows.groupby("inst")["time"].rank(method="dense") - 1).to_numpy(dtype=int)
        seq_len = np.zeros(n, dtype=int)
        np.maximum.at(seq_len, rows["inst"].to_numpy(), step + 1)
    else:
        step = np.zeros(0, dtype=int)
        seq_len = np.zeros(n, dtype=int)
    t_max = int(seq_len.max()) if n else 0

    values = np.full((n, t_max, d), np.nan)
    mask = np.zeros((n, t_max, d), dtype=np.int8)
    times = np.zeros((n, t_max))
    r_inst = rows["inst"].to_numpy()
    values[r_inst, step, var_codes] = value
    mask[r_inst, step, var_codes] = 1
    times[r_inst, step] = time

    print_debug("Loaded %s measurements of %s variables for %s instances from %s" %
                (len(rows), d, n, highlight(path)))
    return [str(v) for v in variables], TemporalTensor(values, mask, times, seq_len)


def load_csv(static_path: str, temporal_path: str) -> Dataset:
    """
    Reads a static/temporal file pair into a ``Dataset``. Instances follow the static file's row order, temporal
    features the order in which variables first appear, and each instance's time grid is the sorted set of its
    own timestamps. Cells without a measurement are unobserved.
    """
    ids, static_names, static, categories = load_static(static_path)
    temporal_names, temporal = load_temporal(temporal_path, ids)
    return Dataset(ids, static, temporal, static_names, temporal_names, static_categories=categories)


class CSVLoader:
    def __init__(self, static_path: str, temporal_path: str) -> None:
        self.static_path = static_path
        self.temporal_path = temporal_path

    def load(self) -> Dataset:
        return load_csv(self.static_path, self.temporal_path)


def write_csv(dataset: Dataset, static_path: str, temporal_path: str) -> None:
    """
    Writes a dataset in the format ``load_csv`` reads. Only raw datasets (no problem attached) can be written.
    Temporal rows are grouped by variable so reloading yields the same feature order.
    """
    if dataset.labels is not None or dataset.actions is not None:
        raise ContractError("Only raw datasets can be written back to CSV; labels and actions have no EAV form")

    static = pd.DataFrame({"id": dataset.ids.astype(str)})
    for j, name in enumerate(dataset.static_names):
        observed = dataset.static.observed_mask[:, j] == 1
        if name in dataset.static_categories:
            cats = np.asarray(dataset.static_categories[name], dtype=object)
            codes = np.where(observed, dataset.static.values[:, j], 0).astype(int)
            column = np.where(observed, cats[codes], "")
        else:
            column = np.array([repr(float(v)) if o else "" for v, o in zip(dataset.static.values[:, j], observed)],
                              dtype=object)
        static[name] = column
    static.to_csv(static_path, index=False)

    temporal = dataset.temporal
    inst, step, var = np.nonzero(temporal.observed_mask == 1)
    order = np.lexsort((step, inst, var))
    inst, step, var = inst[order], step[order], var[order]
    names = np.asarray(dataset.temporal_names, dtype=object)
    eav = pd.DataFrame({
        "id": dataset.ids[inst].astype(str),
        "time": [repr(float(t)) for t in temporal.time[inst, step]],
        "variable": names[var],
        "value": [repr(float(v)) for v in temporal.values[inst, step, var]],
    }, columns=TEMPORAL_HEADER)
    eav.to_csv(temporal_path, index=False)
