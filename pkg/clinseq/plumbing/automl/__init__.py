# -* encoding: utf-8 *-
import time
from typing import List, Optional, Sequence, Tuple, Union

from clinseq.accounting import TrainingLedger
from clinseq.base import Predictor
from clinseq.data import Dataset
from clinseq.primitives import ProblemKind
from clinseq.plumbing.automl.encoding import ConfigEncoding, PipelineSpace, Config
from clinseq.plumbing.automl.ensembles import StepwiseEnsemble, StackingEnsemble, build_stepwise_ensemble, \
    build_stacking_ensemble
from clinseq.plumbing.automl.gp import GaussianProcess, expected_improvement
from clinseq.plumbing.automl.search import CandidateSearch, GP, RANDOM
from clinseq.plumbing.automl.trace import BOMetricSpec, OptimizationTrace, TraceEntry
from clinseq.utils import ParameterError, highlight, print_info, progress

MetricLike = Union[str, BOMetricSpec]


def train_candidate(template: Predictor, config: Config, model_id: str, dataset: Dataset,
                    ledger: TrainingLedger) -> Predictor:
    """
    Fits ``template`` configured with ``config`` as one recorded training run and persists it.
    """
    model = template.with_params(config, model_id)
    ledger.counted(model.fit, label=model_id)(dataset)
    model.save()
    return model


def _search(template: Predictor, dataset: Dataset, metric: MetricLike, num_iter: int, seed: int,
            ledger: Optional[TrainingLedger], stepwise: bool) -> OptimizationTrace:
    metric = BOMetricSpec.of(metric)
    metric.rows(dataset)
    ledger = ledger if ledger is not None else TrainingLedger()
    encoding = ConfigEncoding(template.get_hyperparameter_space())
    search = CandidateSearch(encoding, num_iter, seed, GP, stepwise=stepwise)
    trace = OptimizationTrace(metric)
    for i in progress(range(num_iter), total=num_iter, desc=template.model_id):
        config = search.propose(trace)
        started = time.perf_counter()
        model_id = "%s-%03d" % (template.model_id, i)
        model = train_candidate(template, config, model_id, dataset, ledger)
        scores = metric.step_scores(model, dataset)
        trace.append(TraceEntry(i, config, encoding.encode(config), model.get_path(), scores,
                                time.perf_counter() - started, label=template.name))
    best = trace.incumbent
    print_info("Best %s configuration (%s %.4f): %s" %
               (highlight(template.model_id), metric.metric, best.score, best.config))
    return trace


def optimize_hyperparameters(model_class: Predictor, dataset: Dataset, metric: MetricLike, num_iter: int = 20,
                             seed: int = 0, ledger: Optional[TrainingLedger] = None) -> OptimizationTrace:
    """
    Bayesian optimisation of one model's hyperparameters on the mean validation score. ``model_class`` is an
    unfitted model whose ``get_hyperparameter_space`` spans the search; each iteration trains and persists one
    candidate.
    """
    return _search(model_class, dataset, metric, num_iter, seed, ledger, stepwise=False)


def optimize_stepwise(model_class: Predictor, dataset: Dataset, metric: MetricLike, num_iter: int = 20,
                      seed: int = 0, ledger: Optional[TrainingLedger] = None
                      ) -> Tuple[OptimizationTrace, StepwiseEnsemble]:
    """
    Stepwise model selection: the search treats every step's validation score as its own observation and the
    trained candidates are combined into a stepwise ensemble.
    """
    spec = dataset.require_problem()
    if spec.problem != ProblemKind.ONLINE:
        raise ParameterError("Stepwise model selection needs an online problem; use optimize_hyperparameters "
                             "for one-shot problems")
    if dataset.max_len < 2:
        raise ParameterError("Stepwise model selection needs at least two steps")
    trace = _search(model_class, dataset, metric, num_iter, seed, ledger, stepwise=True)
    ensemble = build_stepwise_ensemble([e.model_path for e in trace], trace.score_matrix(), trace.metric.metric,
                                       model_id="%s-stepwise" % model_class.model_id,
                                       model_path=model_class.model_path)
    return trace, ensemble


def optimize_sash(model_classes: Sequence[Predictor], dataset: Dataset, metric: MetricLike,
                  num_iter_per_class: int = 20, seed: int = 0, ledger: Optional[TrainingLedger] = None
                  ) -> Tuple[StackingEnsemble, List[OptimizationTrace]]:
    """
    Stepwise selection per model class, then a stacking ensemble over the per-class stepwise ensembles. One-shot
    problems stack the per-class incumbents instead.
    """
    if not model_classes:
        raise ParameterError("optimize_sash needs at least one model class")
    spec = dataset.require_problem()
    metric = BOMetricSpec.of(metric)
    members = []  # type: List[Predictor]
    traces = []  # type: List[OptimizationTrace]
    for k, template in enumerate(model_classes):
        if spec.problem == ProblemKind.ONLINE:
            trace, ensemble = optimize_stepwise(template, dataset, metric, num_iter_per_class, seed + k, ledger)
            members.append(ensemble)
        else:
            trace = optimize_hyperparameters(template, dataset, metric, num_iter_per_class, seed + k, ledger)
            members.append(trace.best_model())
        traces.append(trace)
    path = model_classes[0].model_path
    return build_stacking_ensemble(members, dataset, model_id="sash", model_path=path), traces


from clinseq.plumbing.automl.pipeline import Pipeline, PipelineResult, optimize_pipeline, optimize_spsc  # noqa: E402
