# -* encoding: utf-8 *-
from typing import Any

from clinseq import utils
from clinseq.utils import DataError, StageError, ParameterError, highlight, not_builtin, print_warning, \
    print_verbose, progress


def test_plain_output_without_color(capsys: Any) -> None:
    assert highlight("x") == "x"
    print_warning("disk almost full", cols=80)
    assert capsys.readouterr().out == "*** WARNING: disk almost full\n"


def test_verbose_output_is_opt_in(capsys: Any) -> None:
    print_verbose("load")
    assert capsys.readouterr().out == ""
    utils.enable_verbose_output = True
    try:
        print_verbose("load")
    finally:
        utils.enable_verbose_output = False
    assert "Stage: load" in capsys.readouterr().out


def test_stage_errors_keep_the_exit_code() -> None:
    e = StageError("load", DataError("no such file"), "check the paths")
    assert e.exitcode == 3
    assert str(e) == "Stage load failed: no such file\n  Hint: check the paths"


def test_not_builtin_names_the_alternatives() -> None:
    e = not_builtin("The model", "lstm", ["linear", "gru"])
    assert isinstance(e, ParameterError)
    assert "not built-in" in str(e)
    assert "linear, gru" in str(e)


def test_progress_yields_everything() -> None:
    assert list(progress(range(5), total=5)) == [0, 1, 2, 3, 4]
    utils.enable_progressbar = True
    try:
        outer = []
        for i in progress(range(3), total=3, desc="outer"):
            outer.append(list(progress(range(i), total=i)))
    finally:
        utils.enable_progressbar = False
    assert outer == [[], [0], [0, 1]]
    assert utils._pbar is None
