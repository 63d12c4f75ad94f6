# -* encoding: utf-8 *-
import json
import os
import shutil
from typing import Dict, Any, List, Optional

import pandas as pd
from colorama import Fore

from clinseq.plumbing.posthoc import METRIC_TITLES
from clinseq.runner import METRICS_FILE, CONFIG_FILE, PREDICTIONS_FILE, GLOBAL_IMPORTANCE_FILE, \
    INSTANCEWISE_IMPORTANCE_FILE, TRACE_FILE, UNCERTAINTY_FILE, ERROR_FILE
from clinseq.utils import DataError, highlight, ttywrite
from clinseq.utils.ansi import ANSITextWrapper

REQUIRED = [METRICS_FILE, CONFIG_FILE, PREDICTIONS_FILE]


def print_banner(title: str) -> None:
    cols, lines = shutil.get_terminal_size()
    ttywrite("=" * (cols - 15))
    ttywrite("    %s" % highlight(title))
    ttywrite("=" * (cols - 15))


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else "%.4f" % value


def print_performance(metrics: Dict[str, Any], requested: List[str]) -> None:
    """
    One row per requested metric: the value, its spread over repeats and the per-label breakdown. Undefined
    metrics print their reason.
    """
    evaluation = metrics["evaluation"]
    labels = evaluation["labels"]
    print_banner("Performance (%s, %s average, %s repeat%s)" %
                 (evaluation["problem"], evaluation["average"], metrics["repeats"],
                  "s" if metrics["repeats"] != 1 else ""))
    header = "    {metric:<26}{value:>10}{std:>10}".format(metric="metric", value="value", std="std")
    header += "".join("{:>14}".format(label[:13]) for label in labels)
    ttywrite(header)
    for m in requested:
        value = evaluation["metrics"].get(m)
        std = evaluation.get("std", {}).get(m)
        color = Fore.GREEN if value is not None else Fore.YELLOW
        row = "    {metric:<26}{color}{value:>10}{reset}{std:>10}".format(
            metric=METRIC_TITLES.get(m, m), color=color, value=_fmt(value), reset=Fore.RESET,
            std=_fmt(std) if std is not None else "")
        row += "".join("{:>14}".format(_fmt(evaluation["per_label"].get(label, {}).get(m))) for label in labels)
        ttywrite(row)
        if value is None:
            ttywrite("        %s%s%s" % (Fore.YELLOW, evaluation.get("undefined", {}).get(m, "undefined"), Fore.RESET))

    if "calibration" in metrics:
        c = metrics["calibration"][0]
        ttywrite("    Platt calibration: a=%.4f b=%.4f" % (c["a"], c["b"]))
    if "sensing" in metrics:
        for s in metrics["sensing"]:
            ttywrite("    Sensing %s at budget %.2f: %s %s (%.1f%% of measurements kept)" %
                     (s["policy"], s["budget"], s["metric"], _fmt(s["score"]), 100 * s["selected_fraction"]))
    if "automl" in metrics:
        for a in metrics["automl"]:
            ttywrite("    AutoML %s: %s iterations, %s training runs, incumbent #%s (%s)" %
                     (a["mode"], a["iterations"], a["training_runs"], a["incumbent"], _fmt(a["incumbent_score"])))
            if "pipeline" in a:
                ttywrite("        pipeline: %s" % ", ".join("%s=%s" % kv for kv in sorted(a["pipeline"].items())))
    ttywrite()


def print_prediction(predictions: pd.DataFrame, rows: int = 10) -> None:
    """
    The first ``rows`` predictions, with interval bounds when the run estimated uncertainty.
    """
    print_banner("Predictions (%s of %s)" % (min(rows, len(predictions)), len(predictions)))
    bounded = predictions["lower"].notna().any()
    ttywrite("    {:<12}{:>6}  {:<16}{:>12}".format("id", "step", "label", "prediction") +
             ("{:>12}{:>12}".format("lower", "upper") if bounded else ""))
    for _, r in predictions.head(rows).iterrows():
        line = "    {:<12}{:>6}  {:<16}{:>12.4f}".format(str(r["id"])[:11], int(r["step"]), str(r["label"])[:15],
                                                         r["prediction"])
        if bounded:
            line += "{:>12.4f}{:>12.4f}".format(r["lower"], r["upper"])
        ttywrite(line)
    ttywrite()


def top_features(importance: pd.DataFrame, k: int) -> pd.DataFrame:
    """
    The ``k`` most important features in descending order; instance-wise scores are averaged per feature first
    (mean absolute value). Ties keep the order in which the features are listed.
    """
    if "id" in importance.columns:
        importance = importance.assign(importance=importance["importance"].abs()) \
            .groupby("feature", sort=False, as_index=False)["importance"].mean()
    return importance.sort_values("importance", ascending=False, kind="stable").head(k)


def print_interpretation(importance: pd.DataFrame, title: str, k: int = 10) -> None:
    top = top_features(importance, k)
    print_banner("%s (top %s)" % (title, len(top)))
    width = max([len(f) for f in top["feature"]] + [7])
    for rank, (_, r) in enumerate(top.iterrows(), start=1):
        line = "    {rank:>3}. {feature:<{width}}  {value:>10.4f}".format(rank=rank, feature=r["feature"],
                                                                      width=width, value=r["importance"])
        if "stderr" in top.columns and pd.notna(r["stderr"]):
            line += "  +- %.4f" % r["stderr"]
        ttywrite(line)
    ttywrite()


def print_uncertainty(uncertainty: pd.DataFrame) -> None:
    print_banner("Uncertainty")
    ttywrite("    mean std %.4f, mean interval width %.4f over %s predictions" %
             (uncertainty["std"].mean(), (uncertainty["upper"] - uncertainty["lower"]).mean(), len(uncertainty)))
    ttywrite()


def print_trace(trace: pd.DataFrame) -> None:
    scores = trace.groupby("iteration", sort=True)["score"].mean()
    print_banner("Optimisation trace (%s iterations)" % len(scores))
    for iteration, value in scores.items():
        ttywrite("    {:>4}  {:>10}".format(int(iteration), _fmt(value if pd.notna(value) else None)))
    ttywrite()


def report(run_dir: str, rows: int = 10, top_k: Optional[int] = None) -> Dict[str, Any]:
    """
    Prints the summary of a finished run. Reads the run directory only.
    """
    missing = [f for f in REQUIRED if not os.path.isfile(os.path.join(run_dir, f))]
    if missing:
        msg = "%s is not a finished run; missing %s (expected %s)" % (
            highlight(run_dir), ", ".join(missing), ", ".join(REQUIRED))
        if os.path.isfile(os.path.join(run_dir, ERROR_FILE)):
            with open(os.path.join(run_dir, ERROR_FILE), "rt", encoding="utf-8") as f:
                error = json.load(f)
            msg += ". The run failed in stage %s: %s" % (highlight(error["stage"]), error["message"])
        raise DataError(msg)

    with open(os.path.join(run_dir, METRICS_FILE), "rt", encoding="utf-8") as f:
        metrics = json.load(f)
    with open(os.path.join(run_dir, CONFIG_FILE), "rt", encoding="utf-8") as f:
        config = json.load(f)
    k = top_k or int(config["posthoc"]["top_k"])

    cols, lines = shutil.get_terminal_size()
    wrapper = ANSITextWrapper(width=cols - 1, initial_indent="  ", subsequent_indent="  ")
    ttywrite(wrapper.fill("Run %s: %s problem on %s, %s test instances, seed %s" %
                          (highlight(run_dir), config["problem"]["problem"],
                           ", ".join(metrics["evaluation"]["labels"]), metrics["test_instances"], metrics["seed"])))
    ttywrite()

    print_performance(metrics, metrics["requested_metrics"])
    print_prediction(pd.read_csv(os.path.join(run_dir, PREDICTIONS_FILE)), rows)
    for name, printer in ((UNCERTAINTY_FILE, print_uncertainty), (TRACE_FILE, print_trace)):
        path = os.path.join(run_dir, name)
        if os.path.isfile(path):
            printer(pd.read_csv(path))
    for name, title in ((GLOBAL_IMPORTANCE_FILE, "Permutation importance"),
                        (INSTANCEWISE_IMPORTANCE_FILE, "Occlusion importance")):
        path = os.path.join(run_dir, name)
        if os.path.isfile(path):
            print_interpretation(pd.read_csv(path), title, k)
    return metrics
