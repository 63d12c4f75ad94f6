# -* encoding: utf-8 *-
# The dataset model every pipeline stage reads and writes. Missing values are NaN internally, but the masks are
# authoritative: nothing downstream compares against the sentinel.
from typing import Optional, List, Dict, Any, Union, Sequence

import numpy as np

from clinseq.primitives import Fold, ProblemKind, Task, MetricName
from clinseq.utils import ParameterError, DataError, ContractError, highlight

MISSING = np.nan


class TemporalTensor:
    """
    ``values`` and ``observed_mask`` are ``[instance][step][feature]``, ``time`` is ``[instance][step]``,
    ``seq_len`` the number of valid steps per instance. Padding steps are unobserved and have time 0.
    """
    def __init__(self, values: np.ndarray, observed_mask: np.ndarray, time: np.ndarray, seq_len: np.ndarray) -> None:
        self.values = np.asarray(values, dtype=float)
        self.observed_mask = np.asarray(observed_mask, dtype=np.int8)
        self.time = np.asarray(time, dtype=float)
        self.seq_len = np.asarray(seq_len, dtype=int)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def valid_steps(self) -> np.ndarray:
        """
        Boolean ``[instance][step]`` mask of steps below ``seq_len``.
        """
        return np.arange(self.values.shape[1])[None, :] < self.seq_len[:, None]

    def take(self, indices: np.ndarray) -> 'TemporalTensor':
        return TemporalTensor(self.values[indices], self.observed_mask[indices], self.time[indices],
                              self.seq_len[indices])

    def columns(self, indices: Sequence[int]) -> 'TemporalTensor':
        idx = list(indices)
        return TemporalTensor(self.values[:, :, idx], self.observed_mask[:, :, idx], self.time, self.seq_len)

    def copy(self) -> 'TemporalTensor':
        return TemporalTensor(self.values.copy(), self.observed_mask.copy(), self.time.copy(), self.seq_len.copy())


class StaticMatrix:
    def __init__(self, values: np.ndarray, observed_mask: np.ndarray) -> None:
        self.values = np.asarray(values, dtype=float)
        self.observed_mask = np.asarray(observed_mask, dtype=np.int8)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def take(self, indices: np.ndarray) -> 'StaticMatrix':
        return StaticMatrix(self.values[indices], self.observed_mask[indices])

    def columns(self, indices: Sequence[int]) -> 'StaticMatrix':
        idx = list(indices)
        return StaticMatrix(self.values[:, idx], self.observed_mask[:, idx])

    def copy(self) -> 'StaticMatrix':
        return StaticMatrix(self.values.copy(), self.observed_mask.copy())


class LabelTensor:
    """
    ``[instance][label]`` for one-shot problems, ``[instance][step][label]`` for online ones.
    """
    def __init__(self, values: np.ndarray, valid_mask: np.ndarray) -> None:
        self.values = np.asarray(values, dtype=float)
        self.valid_mask = np.asarray(valid_mask, dtype=np.int8)
        if self.values.shape != self.valid_mask.shape:
            raise DataError("Label values %s and valid mask %s differ in shape" %
                            (self.values.shape, self.valid_mask.shape))

    @property
    def online(self) -> bool:
        return self.values.ndim == 3

    def take(self, indices: np.ndarray) -> 'LabelTensor':
        return LabelTensor(self.values[indices], self.valid_mask[indices])


class ActionTensor:
    def __init__(self, values: np.ndarray, names: List[str]) -> None:
        self.values = np.asarray(values, dtype=float)
        self.names = list(names)

    def take(self, indices: np.ndarray) -> 'ActionTensor':
        return ActionTensor(self.values[indices], self.names)


class ProblemSpec:
    def __init__(self, problem: str = ProblemKind.ONLINE, label_names: Optional[List[str]] = None,
                 max_seq_len: int = 24, window: int = 4, treatment_names: Optional[List[str]] = None,
                 task: str = Task.CLASSIFICATION, metric: str = MetricName.AUC) -> None:
        self.problem = problem
        self.label_names = list(label_names or [])
        self.max_seq_len = max_seq_len
        self.window = window
        self.treatment_names = list(treatment_names or [])
        self.task = task
        self.metric = metric
        self.validate()

    @property
    def online(self) -> bool:
        return self.problem == ProblemKind.ONLINE

    def validate(self) -> None:
        if self.problem not in ProblemKind.all:
            raise ParameterError("Unknown problem %s (expected one of %s)" %
                                 (highlight(str(self.problem)), ", ".join(ProblemKind.all)))
        if not self.label_names:
            raise ParameterError("A problem needs at least one label name")
        if int(self.max_seq_len) < 1:
            raise ParameterError("max_seq_len must be positive, not %s" % highlight(str(self.max_seq_len)))
        if int(self.window) < 0:
            raise ParameterError("window must be nonnegative, not %s" % highlight(str(self.window)))
        if not self.window < self.max_seq_len:
            raise ParameterError("window (%s) must be smaller than max_seq_len (%s)" %
                                 (highlight(str(self.window)), highlight(str(self.max_seq_len))))
        if self.task not in Task.all:
            raise ParameterError("Unknown task %s (expected one of %s)" %
                                 (highlight(str(self.task)), ", ".join(Task.all)))
        if MetricName.task(self.metric) != self.task:
            raise ParameterError("Metric %s does not fit a %s task" % (highlight(self.metric), self.task))
        overlap = set(self.label_names) & set(self.treatment_names)
        if overlap:
            raise ParameterError("Features can't be labels and treatments at once: %s" % ", ".join(sorted(overlap)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problem": self.problem,
            "label_names": list(self.label_names),
            "max_seq_len": int(self.max_seq_len),
            "window": int(self.window),
            "treatment_names": list(self.treatment_names),
            "task": self.task,
            "metric": self.metric,
        }

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> 'ProblemSpec':
        return ProblemSpec(**d)

    def __repr__(self) -> str:
        return "ProblemSpec(%s)" % ", ".join("%s=%r" % kv for kv in self.to_dict().items())


class Dataset:
    """
    Static matrix, temporal tensor, labels and actions of a set of instances plus their fold tags. Stages never
    mutate a dataset they were given; they return a new one via ``replace``.

    ``static_categories`` maps categorical static feature names to their category list; the column then holds
    the category's index.
    """
    def __init__(self, ids: Sequence[str], static: StaticMatrix, temporal: TemporalTensor,
                 static_names: List[str], temporal_names: List[str],
                 labels: Optional[LabelTensor] = None, label_names: Optional[List[str]] = None,
                 actions: Optional[ActionTensor] = None, fold: Optional[np.ndarray] = None,
                 spec: Optional[ProblemSpec] = None,
                 static_categories: Optional[Dict[str, List[str]]] = None) -> None:
        self.ids = np.asarray(ids, dtype=object)
        self.static = static
        self.temporal = temporal
        self.static_names = list(static_names)
        self.temporal_names = list(temporal_names)
        self.labels = labels
        self.label_names = list(label_names or [])
        self.actions = actions
        self.fold = np.zeros(len(self.ids), dtype=np.int8) if fold is None else np.asarray(fold, dtype=np.int8)
        self.spec = spec
        self.static_categories = dict(static_categories or {})
        self.validate()

    def validate(self) -> None:
        n = len(self.ids)
        if self.static.values.shape != (n, len(self.static_names)):
            raise DataError("Static matrix has shape %s, expected %s" %
                            (self.static.values.shape, (n, len(self.static_names))))
        if self.temporal.values.ndim != 3 or self.temporal.values.shape[0] != n or \
                self.temporal.values.shape[2] != len(self.temporal_names):
            raise DataError("Temporal tensor has shape %s, expected (%s, T, %s)" %
                            (self.temporal.values.shape, n, len(self.temporal_names)))
        if self.fold.shape != (n,):
            raise DataError("Fold vector has %s entries for %s instances" % (self.fold.shape[0], n))
        if self.labels is not None and self.labels.values.shape[-1] != len(self.label_names):
            raise DataError("Label tensor has %s labels, but %s label names" %
                            (self.labels.values.shape[-1], len(self.label_names)))
        if self.actions is not None and self.actions.values.shape[:2] != self.temporal.values.shape[:2]:
            raise DataError("Action tensor shape %s doesn't match temporal tensor %s" %
                            (self.actions.values.shape, self.temporal.values.shape))

    @property
    def n_instances(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def max_len(self) -> int:
        return self.temporal.values.shape[1]

    @property
    def problem_made(self) -> bool:
        return self.spec is not None and self.labels is not None

    def require_problem(self) -> ProblemSpec:
        if not self.problem_made:
            raise ContractError("This dataset has no problem attached yet; run it through a ProblemMaker first")
        return self.spec  # type: ignore

    def replace(self, **kwargs: Any) -> 'Dataset':
        fields = dict(
            ids=self.ids, static=self.static, temporal=self.temporal, static_names=self.static_names,
            temporal_names=self.temporal_names, labels=self.labels, label_names=self.label_names,
            actions=self.actions, fold=self.fold, spec=self.spec, static_categories=self.static_categories,
        )
        for k in kwargs:
            if k not in fields:
                raise ParameterError("Dataset has no field %s" % highlight(k))
        fields.update(kwargs)
        return Dataset(**fields)

    def subset(self, indices: Union[Sequence[int], np.ndarray]) -> 'Dataset':
        """
        The instances at ``indices``, in that order. Repeated indices are allowed (bootstrap samples).
        """
        idx = np.asarray(indices, dtype=int)
        return self.replace(
            ids=self.ids[idx],
            static=self.static.take(idx),
            temporal=self.temporal.take(idx),
            labels=self.labels.take(idx) if self.labels is not None else None,
            actions=self.actions.take(idx) if self.actions is not None else None,
            fold=self.fold[idx],
        )

    def fold_indices(self, fold: Union[int, str]) -> np.ndarray:
        return np.flatnonzero(self.fold == Fold.parse(fold))

    def slice_fold(self, fold: Union[int, str]) -> 'Dataset':
        return self.subset(self.fold_indices(fold))

    def fit_rows(self) -> np.ndarray:
        """
        Rows a component may learn statistics from: the train fold if one is assigned, every row otherwise.
        """
        train = self.fold_indices(Fold.TRAIN)
        if len(train) or (self.fold != Fold.UNASSIGNED).any():
            return train
        return np.arange(self.n_instances)

    def fit_view(self) -> 'Dataset':
        return self.subset(self.fit_rows())

    def __repr__(self) -> str:
        return "Dataset<%s instances, %s steps, %s static, %s temporal, labels=%s>" % (
            self.n_instances, self.max_len, len(self.static_names), len(self.temporal_names),
            ",".join(self.label_names) or "-")


def label_steps(dataset: Dataset) -> tuple:
    """
    Labels as ``[instance][step][label]`` values and masks for both problem kinds. One-shot labels sit at the
    final valid step of each instance, so models train both kinds the same way.
    """
    spec = dataset.require_problem()
    labels = dataset.labels  # type: LabelTensor
    if labels.online:
        return labels.values, labels.valid_mask
    if spec.problem != ProblemKind.ONE_SHOT:
        raise ContractError("Dataset labels are one-shot but its problem is %s" % highlight(spec.problem))
    n, t = dataset.n_instances, dataset.max_len
    values = np.zeros((n, t, labels.values.shape[1]))
    mask = np.zeros((n, t, labels.values.shape[1]), dtype=np.int8)
    last = np.clip(dataset.temporal.seq_len - 1, 0, max(t - 1, 0))
    rows = np.arange(n)
    has_steps = dataset.temporal.seq_len > 0
    values[rows, last] = np.where(labels.valid_mask == 1, np.nan_to_num(labels.values), 0.0)
    mask[rows, last] = labels.valid_mask * has_steps[:, None]
    return values, mask


def collapse_steps(steps: np.ndarray, dataset: Dataset, problem: Optional[str] = None) -> np.ndarray:
    """
    Per-step outputs ``[instance][step][label]`` shaped like the dataset's labels: unchanged for online problems,
    the final valid step for one-shot ones. Padding steps are zeroed.
    """
    if problem is None:
        problem = dataset.require_problem().problem
    valid = dataset.temporal.valid_steps()
    steps = np.where(valid[:, :, None], steps, 0.0)
    if problem == ProblemKind.ONLINE:
        return steps
    last = np.clip(dataset.temporal.seq_len - 1, 0, max(dataset.max_len - 1, 0))
    return steps[np.arange(dataset.n_instances), last]


def _largest_remainder(n: int, fractions: Sequence[float]) -> List[int]:
    targets = [n * f for f in fractions]
    counts = [int(np.floor(x + 1e-9)) for x in targets]
    remainders = sorted(range(len(targets)), key=lambda i: (-(targets[i] - counts[i]), i))
    for i in remainders[:n - sum(counts)]:
        counts[i] += 1
    return counts


def train_val_test_split(dataset: Dataset, prob_val: float, prob_test: float, seed: int = 0,
                         force: bool = False) -> Dataset:
    """
    Randomly partitions instances into train/val/test. Fold sizes are the expected proportions rounded with the
    largest-remainder rule, the assignment depends only on (instance count, proportions, seed).
    """
    if prob_val < 0 or prob_test < 0 or prob_val + prob_test > 1 + 1e-12:
        raise ParameterError("Split fractions must be nonnegative and sum to at most 1 (prob_val=%s, "
                             "prob_test=%s)" % (prob_val, prob_test))
    if not force and (dataset.fold != Fold.UNASSIGNED).any():
        raise ParameterError("Dataset folds are already assigned; pass force=True to reassign them")

    n = dataset.n_instances
    n_train, n_val, n_test = _largest_remainder(n, [max(1.0 - prob_val - prob_test, 0.0), prob_val, prob_test])
    order = np.random.default_rng(seed).permutation(n)
    fold = np.empty(n, dtype=np.int8)
    fold[order[:n_train]] = Fold.TRAIN
    fold[order[n_train:n_train + n_val]] = Fold.VAL
    fold[order[n_train + n_val:]] = Fold.TEST
    return dataset.replace(fold=fold)


def slice_fold(dataset: Dataset, fold: Union[int, str]) -> Dataset:
    return dataset.slice_fold(fold)


def assign_fold(dataset: Dataset, fold: Union[int, str], indices: Optional[Sequence[int]] = None) -> Dataset:
    """
    Tags ``indices`` (all instances if omitted) with ``fold``.
    """
    tag = Fold.parse(fold)
    new = dataset.fold.copy()
    if indices is None:
        new[:] = tag
    else:
        new[np.asarray(indices, dtype=int)] = tag
    return dataset.replace(fold=new)


def _pad_steps(temporal: TemporalTensor, t: int) -> TemporalTensor:
    n, t_old, d = temporal.values.shape
    if t_old == t:
        return temporal
    values = np.full((n, t, d), np.nan)
    mask = np.zeros((n, t, d), dtype=np.int8)
    time = np.zeros((n, t))
    values[:, :t_old], mask[:, :t_old], time[:, :t_old] = temporal.values, temporal.observed_mask, temporal.time
    return TemporalTensor(values, mask, time, temporal.seq_len)


def concat(first: Dataset, second: Dataset) -> Dataset:
    """
    Stacks two raw datasets with the same features. ``second``'s columns are reordered to ``first``'s names and
    its categorical codes are mapped onto ``first``'s categories (unseen categories are appended). Fold tags are
    kept.
    """
    if first.labels is not None or second.labels is not None:
        raise ContractError("Only raw datasets can be concatenated")
    for kind, a, b in (("static", first.static_names, second.static_names),
                       ("temporal", first.temporal_names, second.temporal_names)):
        if sorted(a) != sorted(b):
            raise DataError("The datasets have different %s features (%s vs %s)" % (kind, ", ".join(a), ", ".join(b)))
    dupes = set(first.ids) & set(second.ids)
    if dupes:
        raise DataError("Instance ids appear twice: %s" % ", ".join(sorted(map(str, dupes))[:5]))

    static = second.static.columns([second.static_names.index(n) for n in first.static_names]).copy()
    categories = {k: list(v) for k, v in first.static_categories.items()}
    for j, name in enumerate(first.static_names):
        if name not in second.static_categories:
            continue
        cats = categories.setdefault(name, [])
        for c in second.static_categories[name]:
            if c not in cats:
                cats.append(c)
        lookup = np.array([cats.index(c) for c in second.static_categories[name]], dtype=float)
        observed = static.observed_mask[:, j] == 1
        static.values[observed, j] = lookup[static.values[observed, j].astype(int)]

    temporal = second.temporal.columns([second.temporal_names.index(n) for n in first.temporal_names])
    t = max(first.max_len, second.max_len)
    a, b = _pad_steps(first.temporal, t), _pad_steps(temporal, t)
    return Dataset(
        np.concatenate([first.ids, second.ids]),
        StaticMatrix(np.concatenate([first.static.values, static.values]),
                     np.concatenate([first.static.observed_mask, static.observed_mask])),
        TemporalTensor(np.concatenate([a.values, b.values]), np.concatenate([a.observed_mask, b.observed_mask]),
                       np.concatenate([a.time, b.time]), np.concatenate([a.seq_len, b.seq_len])),
        first.static_names, first.temporal_names,
        fold=np.concatenate([first.fold, second.fold]), static_categories=categories,
    )


from clinseq.data.loader import load_csv, write_csv, CSVLoader  # noqa: E402
