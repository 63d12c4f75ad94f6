# -* encoding: utf-8 *-
import time
from typing import Dict, List, Optional, Sequence, Tuple, Union

from clinseq.accounting import TrainingLedger
from clinseq.base import Component, Predictor
from clinseq.data import Dataset
from clinseq.primitives import ProblemKind
from clinseq.plumbing.automl.encoding import PipelineSpace, Config
from clinseq.plumbing.automl.ensembles import StepwiseEnsemble
from clinseq.plumbing.automl.search import CandidateSearch, GP
from clinseq.plumbing.automl.trace import BOMetricSpec, OptimizationTrace, TraceEntry
from clinseq.utils import ParameterError, highlight, print_info, progress

MODEL_STAGE = "model"

Menus = Union[Dict[str, Sequence[Component]], Sequence[Tuple[str, Sequence[Component]]]]


def _describe(component: Component) -> str:
    method = getattr(component, "method", None) or getattr(component, "model_type", None)
    return "%s(%s)" % (component.name, method) if method else component.name


class Pipeline:
    """
    Fitted preprocessing stages applied in order.
    """
    def __init__(self, stages: List[Tuple[str, Component]]) -> None:
        self.stages = stages

    def transform(self, dataset: Dataset) -> Dataset:
        for _, component in self.stages:
            dataset = component.transform(dataset)
        return dataset

    def describe(self) -> Dict[str, str]:
        return {stage: _describe(c) for stage, c in self.stages}


class PipelineResult:
    def __init__(self, pipeline: Pipeline, model_class: Predictor, model: Predictor, dataset: Dataset,
                 trace: OptimizationTrace) -> None:
        self.pipeline = pipeline
        # unfitted template of the chosen class, and the incumbent candidate trained from it
        self.model_class = model_class
        self.model = model
        self.dataset = dataset
        self.trace = trace


def fit_stages(space: PipelineSpace, menus: List[Tuple[str, Sequence[Component]]], config: Config,
               dataset: Dataset) -> Tuple[Pipeline, Dataset]:
    stages = []  # type: List[Tuple[str, Component]]
    for stage, menu in menus:
        component = menu[config[stage]].new()
        params = space.params_of(config, stage)
        if params:
            component.set_params(**params)
        dataset = component.fit_transform(dataset)
        stages.append((stage, component))
    return Pipeline(stages), dataset


def optimize_pipeline(component_menus: Menus, model_classes: Sequence[Predictor], dataset: Dataset,
                      metric: Union[str, BOMetricSpec], num_iter: int = 20, method: str = GP, seed: int = 0,
                      ledger: Optional[TrainingLedger] = None) -> PipelineResult:
    """
    Pipeline selection and configuration: searches the cross-product of the stage menus and the model classes,
    each with its own hyperparameters. Every evaluation fits the stages on the train fold, trains the model as
    one recorded run and scores it on the validation fold.
    """
    menus = list(component_menus.items()) if isinstance(component_menus, dict) else list(component_menus)
    if not model_classes:
        raise ParameterError("optimize_pipeline needs at least one model class")
    if any(stage == MODEL_STAGE for stage, _ in menus):
        raise ParameterError("%s is reserved for the model classes" % highlight(MODEL_STAGE))
    metric = BOMetricSpec.of(metric)
    metric.rows(dataset)
    ledger = ledger if ledger is not None else TrainingLedger()

    space = PipelineSpace(menus + [(MODEL_STAGE, list(model_classes))])
    search = CandidateSearch(space, num_iter, seed, method)
    trace = OptimizationTrace(metric)
    for i in progress(range(num_iter), total=num_iter, desc="pipeline"):
        config = search.propose(trace)
        started = time.perf_counter()
        pipeline, transformed = fit_stages(space, menus, config, dataset)
        template = model_classes[config[MODEL_STAGE]]
        model = template.with_params(space.params_of(config, MODEL_STAGE), "psc-%03d" % i)
        ledger.counted(model.fit, label=model.model_id)(transformed)
        model.save()
        scores = metric.step_scores(model, transformed)
        label = ", ".join("%s=%s" % (k, v) for k, v in pipeline.describe().items()) + \
            ", model=%s" % _describe(template)
        trace.append(TraceEntry(i, config, space.encode(config), model.get_path(), scores,
                                time.perf_counter() - started, label=label))

    best = trace.incumbent
    pipeline, transformed = fit_stages(space, menus, best.config, dataset)
    template = model_classes[best.config[MODEL_STAGE]]
    chosen = template.with_params(space.params_of(best.config, MODEL_STAGE), template.model_id)
    print_info("Best pipeline (%s %.4f): %s" % (metric.metric, best.score, best.label))
    return PipelineResult(pipeline, chosen, best.model(), transformed, trace)


def optimize_spsc(component_menus: Menus, model_classes: Sequence[Predictor], dataset: Dataset,
                  metric: Union[str, BOMetricSpec], num_iter_psc: int = 20, num_iter_sms: int = 20, seed: int = 0,
                  ledger: Optional[TrainingLedger] = None, method: str = GP
                  ) -> Tuple[PipelineResult, StepwiseEnsemble, OptimizationTrace]:
    """
    Pipeline search fixes the stages and the model class; stepwise selection then runs within that class on
    the transformed data. The returned trace holds both phases.
    """
    from clinseq.plumbing.automl import optimize_stepwise
    if dataset.require_problem().problem != ProblemKind.ONLINE:
        raise ParameterError("optimize_spsc needs an online problem")
    ledger = ledger if ledger is not None else TrainingLedger()
    result = optimize_pipeline(component_menus, model_classes, dataset, metric, num_iter_psc, method, seed, ledger)
    trace, ensemble = optimize_stepwise(result.model_class, result.dataset, metric, num_iter_sms, seed, ledger)
    return result, ensemble, result.trace.extend(trace)
