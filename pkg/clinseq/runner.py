# -* encoding: utf-8 *-
# End-to-end execution of a run configuration. Every stage runs inside ``stage()``, which turns library errors
# into a StageError naming the stage and what to check. A run directory holds either a metrics document or an
# error record, never both.
import json
import os
from contextlib import contextmanager
from typing import Dict, Any, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from clinseq.accounting import TrainingLedger
from clinseq.base import Component, Predictor
from clinseq.config import RunConfig, _as_list
from clinseq.data import Dataset, load_csv, concat, assign_fold, train_val_test_split
from clinseq.primitives import Fold
from clinseq.plumbing.automl import optimize_hyperparameters, optimize_stepwise, optimize_sash, \
    optimize_pipeline, optimize_spsc, OptimizationTrace, PipelineResult
from clinseq.plumbing.imputation import StaticImputer, TemporalImputer
from clinseq.plumbing.pathways import TreatmentModel, fit_sensing_policy, evaluate_sensing, export_selection
from clinseq.plumbing.posthoc import MetricReport, EnsembleUncertainty, UncertaintyEstimate, PlattCalibrator, \
    evaluate, prediction_frame, interpret_global, interpret_instancewise
from clinseq.plumbing.predictors import SequenceModel
from clinseq.plumbing.preprocessing import FilterNegative, OneHotEncoder, Normalizer, ProblemMaker, compose
from clinseq.plumbing.selection import FeatureSelection, FeatureType
from clinseq.utils import ErrorMessage, StageError, highlight, print_info, print_warning, print_verbose, \
    strip_ANSI

METRICS_FILE = "metrics.json"
ERROR_FILE = "error.json"
CONFIG_FILE = "config.json"
PREDICTIONS_FILE = "predictions.csv"
UNCERTAINTY_FILE = "uncertainty.csv"
GLOBAL_IMPORTANCE_FILE = "importance_global.csv"
INSTANCEWISE_IMPORTANCE_FILE = "importance_instancewise.csv"
TRACE_FILE = "trace.csv"
SELECTION_FILE = "sensing_selection.csv"

HINTS = {
    "config": "fix the configuration; `clinseq run --debug` shows the full document",
    "load": "check the data paths and that the files follow the static wide / temporal EAV layout",
    "preprocess": "check preprocessing.one_hot names the static categorical features",
    "problem": "check problem.label_name and problem.treatment name temporal features and that max_seq_len "
               "exceeds window",
    "impute": "choose a built-in imputation method",
    "select": "feature_selection.*_number must not exceed the number of features",
    "train": "check the model block and that the train and validation folds are not empty",
    "predict": "the test data must have the same features as the train data",
    "posthoc": "check the posthoc block; calibration needs both classes in the validation labels",
    "sensing": "check the sensing block",
    "report": "check that the output directory is writable",
}  # type: Dict[str, str]


@contextmanager
def stage(name: str) -> Iterator[None]:
    print_verbose(highlight(name))
    try:
        yield
    except StageError:
        raise
    except ErrorMessage as e:
        raise StageError(name, e, HINTS.get(name, "")) from e
    except Exception as e:
        cause = ErrorMessage("%s: %s" % (e.__class__.__name__, str(e)), exitcode=4)
        raise StageError(name, cause, "rerun with --debug for the full traceback") from e


class RunResult:
    """
    Everything one repeat of a run produced.
    """
    def __init__(self, report: MetricReport, dataset: Dataset, test: Dataset, predictions: np.ndarray,
                 model: Predictor, ledger: TrainingLedger) -> None:
        self.report = report
        self.dataset = dataset
        self.test = test
        self.predictions = predictions
        self.model = model
        self.ledger = ledger
        self.uncertainty = None  # type: Optional[UncertaintyEstimate]
        self.calibrator = None  # type: Optional[PlattCalibrator]
        self.trace = None  # type: Optional[OptimizationTrace]
        self.importance_global = None  # type: Optional[pd.DataFrame]
        self.importance_instancewise = None  # type: Optional[pd.DataFrame]
        self.sensing = None  # type: Optional[Dict[str, Any]]
        self.selection = None  # type: Optional[np.ndarray]
        self.sensed = None  # type: Optional[Dataset]
        self.automl = None  # type: Optional[Dict[str, Any]]


class Runner:
    def __init__(self, config: RunConfig, seed: int, model_path: str) -> None:
        self.config = config
        self.seed = seed
        self.model_path = model_path
        self.ledger = TrainingLedger()
        self.spec = config.problem_spec()

    def load(self) -> Dataset:
        data = self.config["data"]
        train = load_csv(data["static_train"], data["temporal_train"])
        if data["static_test"]:
            train = train_val_test_split(train, float(data["prob_val"]), 0.0, self.seed)
            test = assign_fold(load_csv(data["static_test"], data["temporal_test"]), Fold.TEST)
            dataset = concat(train, test)
        else:
            dataset = train_val_test_split(train, float(data["prob_val"]), float(data["prob_test"]), self.seed)
        print_info("Loaded %s instances (%s train, %s val, %s test)" %
                   (dataset.n_instances, len(dataset.fold_indices(Fold.TRAIN)), len(dataset.fold_indices(Fold.VAL)),
                    len(dataset.fold_indices(Fold.TEST))))
        return dataset

    def preprocess(self, dataset: Dataset) -> Dataset:
        prep = self.config["preprocessing"]
        stages = []  # type: List[Component]
        if prep["filter_negative"]:
            stages.append(FilterNegative())
        if _as_list(prep["one_hot"]):
            stages.append(OneHotEncoder(_as_list(prep["one_hot"])))
        stages.append(Normalizer(prep["normalization"], exclude=self.spec.label_names + self.spec.treatment_names))
        return compose(stages).fit_transform(dataset)

    def make_problem(self, dataset: Dataset) -> Dataset:
        return ProblemMaker(self.spec, self.config["problem"]["trigger_step"]).fit_transform(dataset)

    def template(self, model_type: Optional[str] = None, model_id: str = "model") -> Predictor:
        m = self.config["model"]
        params = dict(h_dim=m["h_dim"], n_layer=m["n_layer"], batch_size=m["batch_size"], epoch=m["epoch"],
                      learning_rate=m["learning_rate"], static_mode=m["static_mode"], time_mode=m["time_mode"],
                      seed=self.seed, model_id=model_id, model_path=self.model_path)
        if self.spec.treatment_names:
            return TreatmentModel(model_type=m["model_name"], projection_horizon=m["projection_horizon"], **params)
        return SequenceModel(model_type=model_type or m["model_name"], **params)

    def select(self, dataset: Dataset) -> Dataset:
        fs = self.config["feature_selection"]
        for kind in (FeatureType.STATIC, FeatureType.TEMPORAL):
            method = fs["%s_method" % kind]
            if str(method).lower() == "none":
                continue
            selection = FeatureSelection(method, kind, fs["%s_number" % kind], self.spec.metric,
                                         n_jobs=int(self.config["n_jobs"]))
            dataset = selection.fit_transform(dataset)
        return dataset

    def train(self, dataset: Dataset) -> Tuple[Predictor, Predictor, Dataset, Optional[OptimizationTrace],
                                               Optional[Dict[str, Any]]]:
        """
        Returns the final model, an unfitted template for uncertainty ensembles, the dataset the model reads,
        the optimisation trace and an automl summary.
        """
        automl = self.config["automl"]
        mode = automl["mode"]
        num_iter = int(automl["num_iter"])
        metric = self.spec.metric
        if mode == "none":
            model = self.template()
            self.ledger.counted(model.fit, label=model.model_id)(dataset)
            return model, self.template(), dataset, None, None

        classes = [self.template(name, name) for name in _as_list(automl["model_names"])]
        if mode == "hpo":
            template = self.template()
            trace = optimize_hyperparameters(template, dataset, metric, num_iter, self.seed, self.ledger)
            base = template.with_params(trace.incumbent.config, "model")
            model = trace.best_model()
        elif mode == "sms":
            template = self.template()
            trace, model = optimize_stepwise(template, dataset, metric, num_iter, self.seed, self.ledger)
            base = template.with_params(trace.incumbent.config, "model")
        elif mode == "sash":
            model, traces = optimize_sash(classes, dataset, metric, num_iter, self.seed, self.ledger)
            best = max(range(len(traces)), key=lambda k: traces[k].metric.sign * traces[k].incumbent.score)
            base = classes[best].with_params(traces[best].incumbent.config, "model")
            trace = traces[0]
            for other in traces[1:]:
                trace = trace.extend(other)
        else:
            menus = self.menus()
            if mode == "psc":
                result = optimize_pipeline(menus, classes, dataset, metric, num_iter, automl["method"], self.seed,
                                           self.ledger)  # type: PipelineResult
                model, trace = result.model, result.trace
            else:
                result, model, trace = optimize_spsc(menus, classes, dataset, metric, num_iter, num_iter,
                                                     self.seed, self.ledger, automl["method"])
            base, dataset = result.model_class, result.dataset
            summary = self._summary(mode, trace)
            summary["pipeline"] = result.pipeline.describe()
            return model, base, dataset, trace, summary
        return model, base, dataset, trace, self._summary(mode, trace)

    def _summary(self, mode: str, trace: OptimizationTrace) -> Dict[str, Any]:
        return {
            "mode": mode,
            "iterations": len(trace),
            "training_runs": self.ledger.runs,
            "incumbent": trace.incumbent.iteration,
            "incumbent_score": trace.incumbent.score,
        }

    def menus(self) -> List[Tuple[str, List[Component]]]:
        automl = self.config["automl"]
        return [
            ("static_imputation", [StaticImputer(m) for m in _as_list(automl["static_imputation"])]),
            ("temporal_imputation", [TemporalImputer(m) for m in _as_list(automl["temporal_imputation"])]),
        ]

    def calibrate(self, model: Predictor, dataset: Dataset) -> PlattCalibrator:
        val = dataset.slice_fold(Fold.VAL)
        if not val.n_instances:
            val = dataset.slice_fold(Fold.TRAIN)
            print_warning("No validation fold; calibrating on the train fold")
        return PlattCalibrator().fit(model.predict(val), np.nan_to_num(val.labels.values), val.labels.valid_mask)

    def run(self) -> RunResult:
        posthoc = self.config["posthoc"]
        automl_mode = self.config["automl"]["mode"]
        with stage("load"):
            dataset = self.load()
        with stage("preprocess"):
            dataset = self.preprocess(dataset)
        with stage("problem"):
            dataset = self.make_problem(dataset)
        temporal_imputer = None  # type: Optional[TemporalImputer]
        before_temporal = dataset
        if automl_mode not in ("psc", "spsc"):
            with stage("impute"):
                dataset = StaticImputer(self.config["imputation"]["static"]).fit_transform(dataset)
                before_temporal = dataset
                temporal_imputer = TemporalImputer(self.config["imputation"]["temporal"])
                dataset = temporal_imputer.fit_transform(dataset)
            with stage("select"):
                dataset = self.select(dataset)
        with stage("train"):
            model, base, dataset, trace, summary = self.train(dataset)

        with stage("predict"):
            test = dataset.slice_fold(Fold.TEST)
            predictions = model.predict(test)

        with stage("posthoc"):
            calibrator = None
            if posthoc["calibration"]:
                calibrator = self.calibrate(model, dataset)
                predictions = calibrator.transform(predictions)
            report = evaluate(test, predictions, self.config.metrics, self.config["evaluation"]["average"])
            result = RunResult(report, dataset, test, predictions, model, self.ledger)
            result.calibrator, result.trace, result.automl = calibrator, trace, summary
            ensemble = None
            if posthoc["uncertainty"]:
                ensemble = EnsembleUncertainty(base, K=int(posthoc["K"]), level=float(posthoc["level"]),
                                               seed=self.seed, n_jobs=int(self.config["n_jobs"]),
                                               model_id="ensemble", model_path=self.model_path)
                self.ledger.counted(ensemble.fit, label=ensemble.model_id)(dataset)
                result.uncertainty = ensemble.estimate(test)
            methods = _as_list(posthoc["interpretation"])
            if "global" in methods:
                result.importance_global = interpret_global(model, test, int(posthoc["permutation_repeats"]),
                                                            seed=self.seed).to_frame()
            if "instancewise" in methods:
                result.importance_instancewise = interpret_instancewise(model, test).to_frame()

        sensing = self.config["sensing"]
        if sensing["policy"] != "none":
            with stage("sensing"):
                state = fit_sensing_policy(sensing["policy"], before_temporal, ensemble, float(sensing["budget"]),
                                           seed=self.seed)
                sensed = before_temporal.slice_fold(Fold.TEST)
                value, result.selection = evaluate_sensing(state, sensed, temporal_imputer, model)  # type: ignore
                result.sensed = sensed
                result.sensing = {
                    "policy": state.policy,
                    "budget": state.budget,
                    "metric": self.spec.metric,
                    "score": value,
                    "selected_fraction": float(result.selection.sum() /
                                               max(sensed.temporal.observed_mask.sum(), 1)),
                }
        return result


def metrics_document(config: RunConfig, results: List[RunResult]) -> Dict[str, Any]:
    """
    The ``metrics.json`` content. It holds no timing or host information, so equal configurations and seeds give
    identical documents.
    """
    first = results[0]
    report = MetricReport.combine([r.report for r in results]) if len(results) > 1 else first.report
    doc = {
        "seed": config.seed,
        "repeats": len(results),
        "requested_metrics": config.metrics,
        "evaluation": report.todict(),
        "test_instances": first.test.n_instances,
        "training_runs": [r.ledger.runs for r in results],
    }  # type: Dict[str, Any]
    if first.calibrator is not None:
        doc["calibration"] = [r.calibrator.todict() for r in results]  # type: ignore
    if first.uncertainty is not None:
        doc["uncertainty"] = {
            "level": first.uncertainty.level,
            "mean_half_width": [float(np.mean(r.uncertainty.half_width)) for r in results],  # type: ignore
        }
    if first.automl is not None:
        doc["automl"] = [r.automl for r in results]
    if first.sensing is not None:
        doc["sensing"] = [r.sensing for r in results]
    return doc


def _remove(path: str) -> None:
    if os.path.exists(path):
        os.remove(path)


def _write_json(path: str, document: Dict[str, Any]) -> None:
    tmp = "%s.tmp" % path
    with open(tmp, "wt", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    os.replace(tmp, path)


def write_artifacts(run_dir: str, result: RunResult) -> None:
    lower = upper = None
    if result.uncertainty is not None:
        lower, upper = result.uncertainty.lower, result.uncertainty.upper
        frame = prediction_frame(result.test, result.uncertainty.mean, lower, upper)
        frame.insert(frame.columns.get_loc("lower"), "std",
                     prediction_frame(result.test, result.uncertainty.std)["prediction"])
        frame.rename(columns={"prediction": "mean"}).to_csv(os.path.join(run_dir, UNCERTAINTY_FILE), index=False)
    prediction_frame(result.test, result.predictions, lower, upper).to_csv(
        os.path.join(run_dir, PREDICTIONS_FILE), index=False)
    if result.importance_global is not None:
        result.importance_global.sort_values("importance", ascending=False, kind="stable").to_csv(
            os.path.join(run_dir, GLOBAL_IMPORTANCE_FILE), index=False)
    if result.importance_instancewise is not None:
        result.importance_instancewise.to_csv(os.path.join(run_dir, INSTANCEWISE_IMPORTANCE_FILE), index=False)
    if result.trace is not None:
        result.trace.to_csv(os.path.join(run_dir, TRACE_FILE))
    if result.selection is not None and result.sensed is not None:
        export_selection(result.selection, result.sensed, os.path.join(run_dir, SELECTION_FILE))


def run(config: RunConfig, run_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    Executes ``config`` ``repeats`` times with seeds ``seed .. seed + repeats - 1`` and writes the artifacts of
    the first repeat plus the combined metrics document to ``run_dir`` (default: the configured output). On
    failure the directory holds ``error.json`` and no metrics document.
    """
    run_dir = run_dir or config.output
    os.makedirs(run_dir, exist_ok=True)
    metrics_path = os.path.join(run_dir, METRICS_FILE)
    error_path = os.path.join(run_dir, ERROR_FILE)
    _remove(metrics_path)
    _remove(error_path)

    try:
        with stage("config"):
            config.validate()
            _write_json(os.path.join(run_dir, CONFIG_FILE), config.resolved())

        results = []  # type: List[RunResult]
        for r in range(config.repeats):
            seed = config.seed + r
            if config.repeats > 1:
                print_info("Repeat %s/%s (seed %s)" % (r + 1, config.repeats, seed))
            runner = Runner(config, seed, os.path.join(run_dir, "models", "seed-%s" % seed))
            results.append(runner.run())

        with stage("report"):
            write_artifacts(run_dir, results[0])
            document = metrics_document(config, results)
            _write_json(metrics_path, document)
    except StageError as e:
        _write_json(error_path, {"stage": e.stage, "message": strip_ANSI(e.cause.ansi_msg), "hint": e.hint,
                                 "exitcode": e.exitcode})
        _remove(metrics_path)
        raise
    except Exception as e:
        _write_json(error_path, {"stage": "run", "message": "%s: %s" % (e.__class__.__name__, str(e)),
                                 "hint": "rerun with --debug for the full traceback", "exitcode": 4})
        _remove(metrics_path)
        raise
    for metric, value in sorted(document["evaluation"]["metrics"].items()):
        print_info("Test %s: %s" % (metric, highlight("n/a" if value is None else "%.4f" % value)))
    return document
