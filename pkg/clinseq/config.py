# -* encoding: utf-8 *-
# Declarative run configuration. A run is a nested dict of blocks; every block is layered over its defaults with
# a FallbackDict, so a configuration only names what it changes.
import importlib
import json
import os
from typing import Dict, Any, List, Optional

from clinseq.data import ProblemSpec
from clinseq.primitives import FallbackDict, MetricName, ProblemKind, Task, Mode
from clinseq.utils import ConfigError, ErrorMessage, highlight, print_debug

# runconfig_t
RunConfigDict = Dict[str, Any]

AUTOML_MODES = ["none", "hpo", "sms", "psc", "sash", "spsc"]
INTERPRETATION_METHODS = ["global", "instancewise"]
SENSING_POLICIES = ["none", "randomize", "greedy-voi"]

DEFAULTS = {
    "data": {
        "static_train": None,
        "temporal_train": None,
        "static_test": None,
        "temporal_test": None,
        "prob_val": 0.2,
        "prob_test": 0.0,
    },
    "preprocessing": {
        "filter_negative": True,
        "one_hot": [],
        "normalization": "minmax",
    },
    "problem": {
        "problem": ProblemKind.ONLINE,
        "max_seq_len": 24,
        "label_name": ["ventilator"],
        "treatment": [],
        "window": 4,
        "task": Task.CLASSIFICATION,
        "metric_name": MetricName.AUC,
        "trigger_step": None,
    },
    "imputation": {
        "static": "median",
        "temporal": "median",
    },
    "feature_selection": {
        "static_method": "none",
        "static_number": None,
        "temporal_method": "none",
        "temporal_number": None,
    },
    "model": {
        "model_name": "gru",
        "h_dim": 32,
        "n_layer": 1,
        "batch_size": 64,
        "epoch": 20,
        "learning_rate": 1e-3,
        "static_mode": Mode.CONCATENATE,
        "time_mode": Mode.CONCATENATE,
        "projection_horizon": 5,
    },
    "evaluation": {
        "metrics": None,
        "average": "micro",
    },
    "posthoc": {
        "uncertainty": False,
        "K": 5,
        "level": 0.95,
        "calibration": False,
        "interpretation": [],
        "permutation_repeats": 5,
        "top_k": 10,
    },
    "sensing": {
        "policy": "none",
        "budget": 0.5,
    },
    "automl": {
        "mode": "none",
        "num_iter": 20,
        "method": "gp",
        "model_names": ["gru", "rnn"],
        "static_imputation": ["mean", "median"],
        "temporal_imputation": ["median", "locf", "linear"],
    },
}  # type: Dict[str, Dict[str, Any]]

TOP_LEVEL = {
    "seed": 0,
    "output": "clinseq-run",
    "repeats": 1,
    "n_jobs": 1,
}  # type: Dict[str, Any]


def _as_list(value: Any) -> List[Any]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


class RunConfig:
    """
    A validated run configuration. ``config["model"]["h_dim"]`` looks up a block value with its default filled in;
    ``resolved()`` returns the complete document, which is what a run freezes as ``config.json``.
    """
    def __init__(self, document: Optional[RunConfigDict] = None) -> None:
        document = dict(document or {})
        unknown = [k for k in document if k not in DEFAULTS and k not in TOP_LEVEL]
        if unknown:
            raise ConfigError("Unknown configuration keys: %s (known: %s)" %
                              (", ".join(highlight(k) for k in sorted(unknown)),
                               ", ".join(sorted(list(DEFAULTS) + list(TOP_LEVEL)))))

        self.blocks = {}  # type: Dict[str, FallbackDict]
        for name, defaults in DEFAULTS.items():
            block = document.get(name) or {}
            if not isinstance(block, dict):
                raise ConfigError("Configuration block %s must be a mapping, not %s" %
                                  (highlight(name), type(block).__name__))
            self.blocks[name] = FallbackDict(update_with=block, fallback_on=defaults)
            bad = self.blocks[name].unknown_keys()
            if bad:
                raise ConfigError("Unknown keys in block %s: %s (known: %s)" %
                                  (highlight(name), ", ".join(highlight(str(k)) for k in sorted(bad)),
                                   ", ".join(sorted(defaults))))
        self.top = FallbackDict(update_with={k: v for k, v in document.items() if k in TOP_LEVEL},
                                fallback_on=TOP_LEVEL)

    def __getitem__(self, key: str) -> Any:
        if key in self.blocks:
            return self.blocks[key]
        if key in TOP_LEVEL:
            return self.top[key]
        raise KeyError(key)

    @property
    def seed(self) -> int:
        return int(self.top["seed"])

    @property
    def output(self) -> str:
        return str(self.top["output"])

    @property
    def repeats(self) -> int:
        return int(self.top["repeats"])

    @property
    def automl_mode(self) -> str:
        return str(self.blocks["automl"]["mode"])

    @property
    def metrics(self) -> List[str]:
        return _as_list(self.blocks["evaluation"]["metrics"]) or [self.blocks["problem"]["metric_name"]]

    def override(self, **flags: Any) -> 'RunConfig':
        """
        A new configuration with command line flags applied. ``None`` means "not given". ``automl_mode`` and
        ``num_iter`` go into the automl block, everything else is top-level.
        """
        document = self.resolved()
        for key, value in flags.items():
            if value is None:
                continue
            if key == "automl_mode":
                document["automl"]["mode"] = value
            elif key == "num_iter":
                document["automl"]["num_iter"] = value
            elif key in TOP_LEVEL:
                document[key] = value
            else:
                raise ConfigError("Unknown override %s" % highlight(key))
        return RunConfig(document)

    def resolved(self) -> RunConfigDict:
        ret = {name: block.resolved() for name, block in self.blocks.items()}  # type: RunConfigDict
        ret.update(self.top.resolved())
        return ret

    def tojson(self) -> str:
        return json.dumps(self.resolved(), indent=2, sort_keys=True)

    def problem_spec(self) -> ProblemSpec:
        p = self.blocks["problem"]
        return ProblemSpec(problem=p["problem"], label_names=_as_list(p["label_name"]),
                           max_seq_len=int(p["max_seq_len"]), window=int(p["window"]),
                           treatment_names=_as_list(p["treatment"]), task=p["task"], metric=p["metric_name"])

    def validate(self) -> 'RunConfig':
        """
        Cross-field checks that can be made without touching any data. Raises ``ConfigError``.
        """
        from clinseq.plumbing.imputation import resolve_method, DataType
        from clinseq.plumbing.predictors import check_model_type
        from clinseq.plumbing.preprocessing import NormalizationMode
        from clinseq.plumbing.selection import METHODS as SELECTION_METHODS, _aliases as selection_aliases

        data = self.blocks["data"]
        for key in ("static_train", "temporal_train"):
            if not data[key]:
                raise ConfigError("data.%s is required" % key)
        if bool(data["static_test"]) != bool(data["temporal_test"]):
            raise ConfigError("data.static_test and data.temporal_test must be given together")
        prob_val, prob_test = float(data["prob_val"]), float(data["prob_test"])
        if prob_val < 0 or prob_test < 0 or prob_val + prob_test > 1:
            raise ConfigError("data.prob_val + data.prob_test must be nonnegative and at most 1 "
                              "(prob_val=%s, prob_test=%s)" % (prob_val, prob_test))
        if not data["static_test"] and prob_test <= 0:
            raise ConfigError("No test data: give data.static_test/temporal_test or a positive data.prob_test")
        if data["static_test"] and prob_test > 0:
            raise ConfigError("data.prob_test must be 0 when test files are given")

        if self.blocks["preprocessing"]["normalization"] not in NormalizationMode.all:
            raise ConfigError("preprocessing.normalization must be one of %s" % ", ".join(NormalizationMode.all))

        try:
            spec = self.problem_spec()
            resolve_method(self.blocks["imputation"]["static"], DataType.STATIC)
            resolve_method(self.blocks["imputation"]["temporal"], DataType.TEMPORAL)
            for method in _as_list(self.blocks["automl"]["static_imputation"]):
                resolve_method(method, DataType.STATIC)
            for method in _as_list(self.blocks["automl"]["temporal_imputation"]):
                resolve_method(method, DataType.TEMPORAL)
            for m in self.metrics:
                if MetricName.task(m) != spec.task:
                    raise ConfigError("evaluation metric %s does not fit a %s task" % (highlight(m), spec.task))
            model_names = [self.blocks["model"]["model_name"]] + _as_list(self.blocks["automl"]["model_names"])
            for name in model_names:
                check_model_type(name)
        except ConfigError:
            raise
        except ErrorMessage as e:
            raise ConfigError(e.ansi_msg)

        trigger = self.blocks["problem"]["trigger_step"]
        if trigger is not None and spec.problem != ProblemKind.ONE_SHOT:
            raise ConfigError("problem.trigger_step only applies to one-shot problems")
        if spec.treatment_names and self.blocks["model"]["model_name"] not in ("rnn", "gru"):
            raise ConfigError("Treatment problems need a recurrent model (rnn or gru), not %s" %
                              highlight(str(self.blocks["model"]["model_name"])))
        if spec.treatment_names and spec.problem != ProblemKind.ONLINE:
            raise ConfigError("Treatment problems must be online")

        fs = self.blocks["feature_selection"]
        for kind in ("static", "temporal"):
            method = str(fs["%s_method" % kind]).lower()
            method = selection_aliases.get(method, method)
            if method not in SELECTION_METHODS:
                raise ConfigError("feature_selection.%s_method must be one of %s" %
                                  (kind, ", ".join(SELECTION_METHODS)))
            if method != "none" and (fs["%s_number" % kind] is None or int(fs["%s_number" % kind]) < 1):
                raise ConfigError("feature_selection.%s_number must be a positive number" % kind)

        if self.blocks["evaluation"]["average"] not in ("micro", "macro"):
            raise ConfigError("evaluation.average must be micro or macro")

        post = self.blocks["posthoc"]
        if post["uncertainty"] and int(post["K"]) < 2:
            raise ConfigError("posthoc.K must be at least 2")
        if not 0 < float(post["level"]) < 1:
            raise ConfigError("posthoc.level must be in (0, 1)")
        if post["calibration"] and spec.task != Task.CLASSIFICATION:
            raise ConfigError("posthoc.calibration needs a classification task")
        for method in _as_list(post["interpretation"]):
            if method not in INTERPRETATION_METHODS:
                raise ConfigError("Unknown interpretation method %s (expected %s)" %
                                  (highlight(str(method)), ", ".join(INTERPRETATION_METHODS)))

        automl = self.blocks["automl"]
        if "instancewise" in _as_list(post["interpretation"]):
            if spec.treatment_names or automl["mode"] not in ("none", "hpo", "psc"):
                raise ConfigError("Instance-wise interpretation needs a single sequence model; it is not "
                                  "available with treatments or automl.mode %s" % automl["mode"])

        sensing = self.blocks["sensing"]
        if sensing["policy"] not in SENSING_POLICIES:
            raise ConfigError("sensing.policy must be one of %s" % ", ".join(SENSING_POLICIES))
        if sensing["policy"] != "none":
            if automl["mode"] != "none" or spec.treatment_names:
                raise ConfigError("Sensing evaluation runs with a plain model only (automl.mode none, no "
                                  "treatments)")
            if str(fs["temporal_method"]).lower() != "none" or str(fs["static_method"]).lower() != "none":
                raise ConfigError("Sensing evaluation needs every feature; set feature_selection.static_method "
                                  "and feature_selection.temporal_method to none")
            if not 0 < float(sensing["budget"]) <= 1:
                raise ConfigError("sensing.budget must be in (0, 1]")
            if sensing["policy"] == "greedy-voi" and not post["uncertainty"]:
                raise ConfigError("sensing.policy greedy-voi scores features with the uncertainty ensemble; "
                                  "set posthoc.uncertainty")

        if automl["mode"] not in AUTOML_MODES:
            raise ConfigError("automl.mode must be one of %s" % ", ".join(AUTOML_MODES))
        if int(automl["num_iter"]) < 1:
            raise ConfigError("automl.num_iter must be at least 1")
        if automl["method"] not in ("gp", "random"):
            raise ConfigError("automl.method must be gp or random")
        if automl["mode"] != "none":
            if prob_val <= 0:
                raise ConfigError("automl needs a validation fold; set data.prob_val > 0")
            if spec.treatment_names:
                raise ConfigError("automl does not search treatment models")
        if automl["mode"] in ("sms", "spsc") and spec.problem != ProblemKind.ONLINE:
            raise ConfigError("automl.mode %s needs an online problem" % automl["mode"])
        if automl["mode"] in ("sash", "psc", "spsc") and not _as_list(automl["model_names"]):
            raise ConfigError("automl.model_names must name at least one model class")

        if int(self.top["repeats"]) < 1:
            raise ConfigError("repeats must be at least 1")
        if int(self.top["n_jobs"]) < 1:
            raise ConfigError("n_jobs must be at least 1")
        return self

    @staticmethod
    def from_json(path: str) -> 'RunConfig':
        try:
            with open(path, "rt", encoding="utf-8") as f:
                document = json.load(f)
        except FileNotFoundError:
            raise ConfigError("Configuration file %s does not exist" % highlight(path))
        except ValueError as e:
            raise ConfigError("Can't parse configuration file %s: %s" % (highlight(path), str(e)))
        if not isinstance(document, dict):
            raise ConfigError("Configuration file %s must hold a JSON object" % highlight(path))
        print_debug("Loaded configuration from %s" % highlight(os.path.abspath(path)))
        return RunConfig(document)

    @staticmethod
    def from_module(module: str) -> 'RunConfig':
        """
        Loads ``package.module[:name]``: the module's ``entry_point`` (or ``name``) holds the configuration dict.
        """
        if ":" in module:
            module, entrypoint_name = module.split(":", 1)
        else:
            entrypoint_name = "entry_point"
        try:
            print_debug("Loading configuration module %s:%s" % (module, entrypoint_name))
            mod = importlib.import_module(module)
        except ImportError as e:
            raise ConfigError("Can't import configuration module %s (use --debug for more information)" %
                              highlight(module)) from e
        if not hasattr(mod, entrypoint_name):
            raise ConfigError("Module %s has no `%s` top-level variable" % (highlight(module), entrypoint_name))
        document = getattr(mod, entrypoint_name)
        if callable(document):
            document = document()
        if not isinstance(document, dict):
            raise ConfigError("`%s` in %s is not a configuration dict" % (entrypoint_name, highlight(module)))
        return RunConfig(document)
