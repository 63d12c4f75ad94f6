# -* encoding: utf-8 *-
from typing import List, Dict, Optional, Sequence, Tuple, Any

import numpy as np

from clinseq.base import Component
from clinseq.data import Dataset, StaticMatrix, TemporalTensor, LabelTensor, ActionTensor, ProblemSpec
from clinseq.primitives import ProblemKind, Task
from clinseq.utils import ParameterError, DataError, print_debug, highlight


class NormalizationMode:
    MINMAX = "minmax"
    STANDARD = "standard"
    NONE = "none"

    all = [MINMAX, STANDARD, NONE]


class FilterNegative(Component):
    """
    Negative measurements are recording errors in clinical data; this stage turns them into missing values.
    Category codes, labels, actions and time stamps are left alone.
    """
    def _fit(self, dataset: Dataset) -> None:
        pass

    def _transform(self, dataset: Dataset) -> Dataset:
        static = dataset.static.copy()
        numeric = np.array([n not in dataset.static_categories for n in dataset.static_names], dtype=bool)
        drop_s = (static.observed_mask == 1) & (static.values < 0) & numeric[None, :]
        static.values[drop_s] = np.nan
        static.observed_mask[drop_s] = 0

        temporal = dataset.temporal.copy()
        drop_t = (temporal.observed_mask == 1) & (temporal.values < 0)
        temporal.values[drop_t] = np.nan
        temporal.observed_mask[drop_t] = 0

        if drop_s.any() or drop_t.any():
            print_debug("Filtered %s static and %s temporal negative values" % (drop_s.sum(), drop_t.sum()))
        return dataset.replace(static=static, temporal=temporal)


def _category_label(value: float) -> str:
    return "%d" % value if float(value).is_integer() else repr(float(value))


def _static_strings(dataset: Dataset, name: str) -> Tuple[np.ndarray, np.ndarray]:
    """
    The column ``name`` as category strings plus its observed mask. Numeric columns are formatted.
    """
    j = dataset.static_names.index(name)
    observed = dataset.static.observed_mask[:, j] == 1
    column = dataset.static.values[:, j]
    if name in dataset.static_categories:
        cats = dataset.static_categories[name]
        strings = np.array([cats[int(v)] if o else "" for v, o in zip(column, observed)], dtype=object)
    else:
        strings = np.array([_category_label(v) if o else "" for v, o in zip(column, observed)], dtype=object)
    return strings, observed


class OneHotEncoder(Component):
    param_names = ["feature_names"]

    def __init__(self, feature_names: Optional[Sequence[str]] = None) -> None:
        super().__init__()
        if isinstance(feature_names, str):
            feature_names = [feature_names]
        self.feature_names = list(feature_names or [])
        self.categories = {}  # type: Dict[str, List[str]]

    def _fit(self, dataset: Dataset) -> None:
        self.categories = {}
        for name in self.feature_names:
            if name not in dataset.static_names:
                raise ParameterError("Can't one-hot encode %s: not a static feature (static features: %s)" %
                                     (highlight(name), ", ".join(dataset.static_names)))
        rows = dataset.fit_rows()
        for name in self.feature_names:
            strings, observed = _static_strings(dataset, name)
            self.categories[name] = sorted(set(strings[rows][observed[rows]]))

    def _transform(self, dataset: Dataset) -> Dataset:
        missing = [f for f in self.categories if f not in dataset.static_names]
        if missing:
            raise ParameterError("Dataset lacks the encoded static features %s" % ", ".join(missing))

        values = []  # type: List[np.ndarray]
        masks = []  # type: List[np.ndarray]
        names = []  # type: List[str]
        n = dataset.n_instances
        for j, name in enumerate(dataset.static_names):
            if name not in self.categories:
                values.append(dataset.static.values[:, j:j + 1])
                masks.append(dataset.static.observed_mask[:, j:j + 1])
                names.append(name)
                continue
            strings, observed = _static_strings(dataset, name)
            cats = self.categories[name]
            block = np.zeros((n, len(cats)))
            for k, cat in enumerate(cats):
                block[:, k] = (strings == cat)
            block[~observed] = np.nan
            values.append(block)
            masks.append(np.repeat(observed[:, None], len(cats), axis=1).astype(np.int8))
            names.extend("%s_%s" % (name, cat) for cat in cats)

        static = StaticMatrix(np.concatenate(values, axis=1) if values else np.zeros((n, 0)),
                              np.concatenate(masks, axis=1) if masks else np.zeros((n, 0), dtype=np.int8))
        categories = {k: v for k, v in dataset.static_categories.items() if k not in self.categories}
        return dataset.replace(static=static, static_names=names, static_categories=categories)


class Normalizer(Component):
    """
    Rescales static and temporal features with statistics of the observed cells of the fit rows. ``exclude``
    names features (labels, treatments) that keep their raw values. Categorical static columns are never touched.
    """
    param_names = ["mode", "exclude"]

    def __init__(self, mode: str = NormalizationMode.MINMAX, exclude: Optional[Sequence[str]] = None) -> None:
        super().__init__()
        if mode is None:
            mode = NormalizationMode.NONE
        if mode not in NormalizationMode.all:
            raise ParameterError("Unknown normalization mode %s (expected one of %s)" %
                                 (highlight(str(mode)), ", ".join(NormalizationMode.all)))
        self.mode = mode
        self.exclude = list(exclude or [])
        self.static_stats = {}  # type: Dict[str, Tuple[float, float]]
        self.temporal_stats = {}  # type: Dict[str, Tuple[float, float]]

    def _stats(self, observed: np.ndarray) -> Tuple[float, float]:
        """
        ``(offset, scale)`` such that the normalized value is ``(x - offset) / scale``.
        """
        if not len(observed):
            return 0.0, 1.0
        if self.mode == NormalizationMode.MINMAX:
            lo, hi = float(observed.min()), float(observed.max())
            return lo, (hi - lo) or 1.0
        mean, std = float(observed.mean()), float(observed.std())
        return mean, std or 1.0

    def _fit(self, dataset: Dataset) -> None:
        self.static_stats, self.temporal_stats = {}, {}
        if self.mode == NormalizationMode.NONE:
            return
        rows = dataset.fit_rows()
        for j, name in enumerate(dataset.static_names):
            if name in self.exclude or name in dataset.static_categories:
                continue
            col = dataset.static.values[rows, j]
            self.static_stats[name] = self._stats(col[dataset.static.observed_mask[rows, j] == 1])
        valid = dataset.temporal.valid_steps()[rows]
        for d, name in enumerate(dataset.temporal_names):
            if name in self.exclude:
                continue
            cells = dataset.temporal.values[rows, :, d]
            self.temporal_stats[name] = self._stats(cells[(dataset.temporal.observed_mask[rows, :, d] == 1) & valid])

    def _transform(self, dataset: Dataset) -> Dataset:
        if self.mode == NormalizationMode.NONE:
            return dataset

        static = dataset.static.copy()
        for j, name in enumerate(dataset.static_names):
            if name in self.static_stats:
                offset, scale = self.static_stats[name]
                obs = static.observed_mask[:, j] == 1
                static.values[obs, j] = (static.values[obs, j] - offset) / scale

        temporal = dataset.temporal.copy()
        for d, name in enumerate(dataset.temporal_names):
            if name in self.temporal_stats:
                offset, scale = self.temporal_stats[name]
                obs = temporal.observed_mask[:, :, d] == 1
                temporal.values[:, :, d][obs] = (temporal.values[:, :, d][obs] - offset) / scale
        return dataset.replace(static=static, temporal=temporal)


class ProblemMaker(Component):
    """
    Turns loaded sequences into a supervised problem: sequences are cut to the ``max_seq_len`` most recent steps
    and padded at the tail, label features move into a ``LabelTensor``, treatment features into an
    ``ActionTensor``.

    Online labels at step ``t`` are the label feature at ``t + window``. A one-shot label is the last observed
    value of the label feature; with ``trigger_step`` set, inputs end before that step and the label is the last
    observed value from the trigger step on.
    """
    param_names = ["spec", "trigger_step"]

    def __init__(self, spec: ProblemSpec, trigger_step: Optional[int] = None) -> None:
        super().__init__()
        spec.validate()
        if trigger_step is not None:
            if spec.problem != ProblemKind.ONE_SHOT:
                raise ParameterError("trigger_step only applies to one-shot problems")
            if trigger_step < 1:
                raise ParameterError("trigger_step must be at least 1, not %s" % highlight(str(trigger_step)))
        self.spec = spec
        self.trigger_step = trigger_step

    def _check_names(self, dataset: Dataset) -> None:
        for kind, names in (("label", self.spec.label_names), ("treatment", self.spec.treatment_names)):
            for name in names:
                if name not in dataset.temporal_names:
                    raise ParameterError("The %s %s is not a temporal feature (temporal features: %s)" %
                                         (kind, highlight(name), ", ".join(dataset.temporal_names)))

    def _fit(self, dataset: Dataset) -> None:
        self._check_names(dataset)

    def _transform(self, dataset: Dataset) -> Dataset:
        self._check_names(dataset)
        if dataset.labels is not None:
            raise ParameterError("This dataset already carries labels")

        spec = self.spec
        src = dataset.temporal
        n, t_src = src.values.shape[:2]
        names = dataset.temporal_names
        label_idx = [names.index(l) for l in spec.label_names]
        action_idx = [names.index(a) for a in spec.treatment_names]
        input_idx = [i for i, name in enumerate(names) if i not in label_idx and i not in action_idx]

        seq_len = src.seq_len.copy()
        one_shot_values = one_shot_mask = None  # type: Any
        if spec.problem == ProblemKind.ONE_SHOT:
            start = 0 if self.trigger_step is None else self.trigger_step
            one_shot_values, one_shot_mask = self._last_observed(src, label_idx, start)
            if self.trigger_step is not None:
                seq_len = np.minimum(seq_len, self.trigger_step)

        t_out = int(spec.max_seq_len)
        new_len = np.minimum(seq_len, t_out)
        first = seq_len - new_len
        steps = np.arange(t_out)[None, :]
        valid = steps < new_len[:, None]
        gather = np.clip(first[:, None] + steps, 0, max(t_src - 1, 0))
        rows = np.arange(n)[:, None]

        if t_src:
            values = np.where(valid[:, :, None], src.values[rows, gather], np.nan)
            mask = np.where(valid[:, :, None], src.observed_mask[rows, gather], 0).astype(np.int8)
            time = np.where(valid, src.time[rows, gather], 0.0)
        else:
            values = np.full((n, t_out, len(names)), np.nan)
            mask = np.zeros((n, t_out, len(names)), dtype=np.int8)
            time = np.zeros((n, t_out))

        if spec.problem == ProblemKind.ONLINE:
            labels = self._shifted(values, mask, new_len, label_idx, int(spec.window))
        else:
            labels = LabelTensor(one_shot_values, one_shot_mask)
        self._check_label_values(labels)

        actions = None
        if action_idx:
            act = np.where(mask[:, :, action_idx] == 1, values[:, :, action_idx], 0.0)
            actions = ActionTensor(np.nan_to_num(act), spec.treatment_names)

        temporal = TemporalTensor(values[:, :, input_idx], mask[:, :, input_idx], time, new_len)
        return dataset.replace(
            temporal=temporal,
            temporal_names=[names[i] for i in input_idx],
            labels=labels,
            label_names=list(spec.label_names),
            actions=actions,
            spec=spec,
        )

    @staticmethod
    def _last_observed(src: TemporalTensor, label_idx: List[int], start: int) -> Tuple[np.ndarray, np.ndarray]:
        n, t = src.values.shape[:2]
        out = np.full((n, len(label_idx)), np.nan)
        valid = np.zeros((n, len(label_idx)), dtype=np.int8)
        if not t:
            return out, valid
        in_range = (np.arange(t)[None, :] >= start) & src.valid_steps()
        for k, d in enumerate(label_idx):
            observed = (src.observed_mask[:, :, d] == 1) & in_range
            # index of the last True per row
            last = t - 1 - np.argmax(observed[:, ::-1], axis=1)
            has = observed.any(axis=1)
            out[has, k] = src.values[np.flatnonzero(has), last[has], d]
            valid[has, k] = 1
        return out, valid

    @staticmethod
    def _shifted(values: np.ndarray, mask: np.ndarray, seq_len: np.ndarray, label_idx: List[int],
                 window: int) -> LabelTensor:
        n, t = values.shape[:2]
        y = np.full((n, t, len(label_idx)), np.nan)
        m = np.zeros((n, t, len(label_idx)), dtype=np.int8)
        if window < t:
            y[:, :t - window] = values[:, window:][:, :, label_idx]
            m[:, :t - window] = mask[:, window:][:, :, label_idx]
        in_range = (np.arange(t)[None, :] + window) < seq_len[:, None]
        m = (m * in_range[:, :, None]).astype(np.int8)
        y[m == 0] = np.nan
        return LabelTensor(y, m)

    def _check_label_values(self, labels: LabelTensor) -> None:
        if self.spec.task != Task.CLASSIFICATION:
            return
        valid = labels.values[labels.valid_mask == 1]
        bad = valid[(valid != 0) & (valid != 1)]
        if len(bad):
            raise DataError("Classification labels must be 0 or 1, found %s (were the labels normalized? exclude "
                            "them from normalization)" % highlight(repr(float(bad[0]))))


class PipelineComposer(Component):
    """
    An ordered chain of stages. Fitting fits every stage on the output of its predecessor, transforming threads
    a dataset through the fitted stages.
    """
    param_names = ["stages"]

    def __init__(self, stages: Optional[Sequence[Component]] = None) -> None:
        super().__init__()
        self.stages = list(stages or [])

    def new(self, model_id: Optional[str] = None) -> 'PipelineComposer':
        return PipelineComposer([s.new() for s in self.stages])

    def _run(self, dataset: Dataset) -> Dataset:
        for stage in self.stages:
            print_debug("Fitting stage %s" % highlight(stage.name))
            dataset = stage.fit_transform(dataset)
            self.warnings.extend(stage.warnings)
        return dataset

    def _fit(self, dataset: Dataset) -> None:
        self._run(dataset)

    def fit_transform(self, dataset: Dataset) -> Dataset:
        self.warnings = []
        result = self._run(dataset)
        self.fitted = True
        return result

    def _transform(self, dataset: Dataset) -> Dataset:
        for stage in self.stages:
            dataset = stage.transform(dataset)
        return dataset


def compose(stages: Sequence[Component]) -> PipelineComposer:
    return PipelineComposer(stages)


def filter_negative(dataset: Dataset) -> Dataset:
    return FilterNegative().fit_transform(dataset)


def one_hot_encode(dataset: Dataset, feature_names: Sequence[str]) -> Dataset:
    return OneHotEncoder(feature_names).fit_transform(dataset)


def normalize(dataset: Dataset, mode: str, exclude: Optional[Sequence[str]] = None) -> Dataset:
    return Normalizer(mode, exclude).fit_transform(dataset)


def make_problem(dataset: Dataset, spec: ProblemSpec, trigger_step: Optional[int] = None) -> Dataset:
    return ProblemMaker(spec, trigger_step).fit_transform(dataset)
