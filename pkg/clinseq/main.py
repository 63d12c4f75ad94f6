#!/usr/bin/python3 -u
# -* encoding: utf-8 *-
import shutil
import sys
from argparse import ArgumentParser, Namespace
from typing import List, Optional

from clinseq import utils
from clinseq.config import RunConfig
from clinseq.data.synth import GENERATORS, synth
from clinseq.output import report
from clinseq.runner import run
from clinseq.utils import print_debug, print_info, print_error, success


def banner(title: str) -> None:
    width = shutil.get_terminal_size()[0] - 15
    print_info("=" * width)
    print_info("{{:^{width}}}".format(width=width).format(utils.highlight(title)))
    print_info("=" * width)


def load_config(args: Namespace) -> RunConfig:
    if args.module and args.config:
        raise utils.ConfigError("Use either --module or --config, not both")
    if args.module:
        config = RunConfig.from_module(args.module)
    elif args.config:
        config = RunConfig.from_json(args.config)
    else:
        raise utils.ConfigError("'--module' or '--config' must be set")
    return config.override(seed=args.seed, output=args.output, automl_mode=args.automl_mode,
                           num_iter=args.num_iter, repeats=args.repeats)


def cmd_run(args: Namespace) -> None:
    config = load_config(args)
    banner("Run %s" % config.output)
    print_debug("Resolved configuration:\n%s" % config.tojson())
    run(config)
    success("Run finished; artifacts in %s" % config.output)


def cmd_synth(args: Namespace) -> None:
    paths = synth(args.generator, args.out_dir, name=args.name, n=args.n, n_test=args.n_test, T=args.T, D=args.D,
                  missing_rate=args.missing_rate, noise=args.noise, lag=args.lag, seed=args.seed,
                  min_len=args.min_len, task=args.task)
    for key, path in sorted(paths.items()):
        print_info("%s: %s" % (key, path))


def cmd_report(args: Namespace) -> None:
    report(args.run_dir, rows=args.rows, top_k=args.top_k)


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--debug", dest="debug", action="store_true", default=False,
                        help="Enable debug output and full tracebacks.")
    common.add_argument("-v", "--verbose", dest="verbose", action="store_true", default=False,
                        help="Verbose output.")
    common.add_argument("--no-color", dest="no_color", action="store_true", default=False,
                        help="Don't output ANSI colors")
    common.add_argument("--progressbar", dest="progressbar", action="store_true", default=False,
                        help="Show progress bars for training and optimisation loops")

    parser = ArgumentParser(description="clinseq builds prediction pipelines for clinical time series from "
                                        "declarative run configurations: loading, preprocessing, imputation, "
                                        "feature selection, sequence models, automated model search and "
                                        "post-hoc analysis.")
    sub = parser.add_subparsers(dest="command")
    sub.required = True

    p_run = sub.add_parser("run", parents=[common], help="Execute a run configuration end to end.")
    p_run.add_argument("-m", "--module", dest="module", default=None,
                       help="A Python module (package.module[:name]) whose `entry_point` holds the run "
                            "configuration dict.")
    p_run.add_argument("-c", "--config", dest="config", default=None,
                       help="A JSON run configuration, e.g. the config.json frozen in an earlier run directory.")
    p_run.add_argument("--seed", dest="seed", type=int, default=None, help="Overrides the configured seed.")
    p_run.add_argument("-o", "--output", dest="output", default=None,
                       help="Overrides the configured run directory.")
    p_run.add_argument("--automl-mode", dest="automl_mode", default=None,
                       choices=["none", "hpo", "sms", "psc", "sash", "spsc"], help="Overrides automl.mode.")
    p_run.add_argument("--num-iter", dest="num_iter", type=int, default=None, help="Overrides automl.num_iter.")
    p_run.add_argument("--repeats", dest="repeats", type=int, default=None,
                       help="Repeat the run with seeds seed .. seed + repeats - 1.")
    p_run.set_defaults(func=cmd_run)

    p_synth = sub.add_parser("synth", parents=[common],
                             help="Write a synthetic dataset (static + temporal EAV, train + test).")
    p_synth.add_argument("generator", choices=sorted(GENERATORS))
    p_synth.add_argument("out_dir")
    p_synth.add_argument("--name", dest="name", default=None,
                         help="File name prefix (default: the generator name).")
    p_synth.add_argument("-n", dest="n", type=int, default=1000, help="Train instances.")
    p_synth.add_argument("--n-test", dest="n_test", type=int, default=None, help="Test instances (default n/4).")
    p_synth.add_argument("-T", dest="T", type=int, default=24, help="Steps per sequence.")
    p_synth.add_argument("-D", dest="D", type=int, default=5, help="Input features.")
    p_synth.add_argument("--missing-rate", dest="missing_rate", type=float, default=0.0)
    p_synth.add_argument("--noise", dest="noise", type=float, default=0.0)
    p_synth.add_argument("--lag", dest="lag", type=int, default=4)
    p_synth.add_argument("--min-len", dest="min_len", type=int, default=None)
    p_synth.add_argument("--task", dest="task", default="classification", choices=["classification", "regression"])
    p_synth.add_argument("--seed", dest="seed", type=int, default=0)
    p_synth.set_defaults(func=cmd_synth)

    p_report = sub.add_parser("report", parents=[common], help="Print the summary of a finished run.")
    p_report.add_argument("run_dir")
    p_report.add_argument("--rows", dest="rows", type=int, default=10, help="Prediction rows to show.")
    p_report.add_argument("--top-k", dest="top_k", type=int, default=None, help="Importances to show.")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    module_parser = ArgumentParser(add_help=False)
    module_parser.add_argument("--debug", action="store_true", dest="debug", default=False)
    module_parser.add_argument("--no-color", action="store_true", dest="no_color", default=False)
    preargs, _ = module_parser.parse_known_args(argv if argv is not None else sys.argv[1:])

    utils.enable_debug_output = preargs.debug
    utils.init_color(preargs.no_color)

    args = build_parser().parse_args(argv if argv is not None else sys.argv[1:])
    utils.enable_verbose_output = args.verbose
    utils.enable_progressbar = args.progressbar
    args.func(args)


def app(argv: Optional[List[str]] = None) -> None:
    try:
        main(argv)
    except utils.ErrorMessage as e:
        print_error("%s" % e.ansi_msg)
        if utils.enable_debug_output:
            print(utils.highlight("********** VERBOSE OUTPUT Full Exception Follows **********"))
            raise
        else:
            sys.exit(e.exitcode)
    except Exception as e:
        print_error("Unexpected %s: %s" % (e.__class__.__name__, str(e)))
        if utils.enable_debug_output:
            raise
        sys.exit(4)


if __name__ == "__main__":
    app()
