# -* encoding: utf-8 *-
# Console output for the command line and library code alike. Everything is printed through ``ttywrite`` so that
# messages and the (single) progress bar don't overwrite each other.
import shutil
from textwrap import TextWrapper
from typing import Dict, List, Any, Optional, Iterable, Iterator, Tuple, TypeVar
from typing import Type

import colorama
from tqdm import tqdm
from colorama import Fore, Style

from clinseq.utils.ansi import ANSITextWrapper, strip_ANSI

enable_debug_output = False  # type: bool
enable_verbose_output = False  # type: bool
enable_color = True  # type: bool
enable_progressbar = False  # type: bool

# level: (marker colour, text colour)
PALETTE = {
    "error": (Fore.LIGHTRED_EX, Fore.RED),
    "warning": (Fore.LIGHTWHITE_EX, Fore.YELLOW),
    "info": (Fore.LIGHTCYAN_EX, Fore.LIGHTBLUE_EX),
    "verbose": (Fore.LIGHTCYAN_EX, Fore.CYAN),
    "debug": (Fore.LIGHTMAGENTA_EX, Fore.MAGENTA),
    "success": (Fore.GREEN, Fore.GREEN),
    "highlight": (Fore.LIGHTWHITE_EX, Fore.LIGHTWHITE_EX),
}  # type: Dict[str, Tuple[str, str]]

_palette = dict(PALETTE)
_reset = Style.RESET_ALL  # type: str
_TextWrapper = ANSITextWrapper  # type: Type[TextWrapper]


def init_color(no_color: bool) -> None:
    global enable_color, _reset, _TextWrapper
    enable_color = not no_color
    if no_color:
        _palette.update({level: ("", "") for level in PALETTE})
        _reset = ""
        _TextWrapper = TextWrapper
    else:
        colorama.init()
        _palette.update(PALETTE)
        _reset = Style.RESET_ALL
        _TextWrapper = ANSITextWrapper


_pbar = None  # type: Optional[tqdm]

IT = TypeVar('IT')


def progressbar(total: Optional[int] = None, desc: str = "") -> tqdm:
    """
    The shared progress bar; ``ttywrite`` prints above it while it is open. Closing it frees the slot for the
    next loop.
    """
    global _pbar
    if not _pbar:
        bar = tqdm(
            bar_format="  {{desc}} {{n:>{len}}}/{{total}}  |{{bar}}| {{percentage:3.0f}}%  "
                       "{{remaining}}   ".format(len=len(str(total))),
            ascii=True, total=total, leave=False, desc=desc,
        )
        close = bar.close

        def release(_self: tqdm) -> None:
            global _pbar
            close()
            _pbar = None

        bar.close = release.__get__(bar, tqdm)
        _pbar = bar
    return _pbar


def progress(iterable: Iterable[IT], total: Optional[int] = None, desc: str = "") -> Iterator[IT]:
    """
    Iterates ``iterable`` and ticks the shared progress bar if progress bars are enabled and no other loop
    currently owns the bar. Nested loops (epochs inside optimisation iterations) stay silent.
    """
    if not enable_progressbar or _pbar is not None:
        yield from iterable
        return

    pbar = progressbar(total, desc=desc)
    try:
        for item in iterable:
            yield item
            pbar.update()
    finally:
        pbar.close()


def ttywrite(msg: str = "", **kwargs: Any) -> None:
    """
    Use this instead of ``print()`` whenever possible so that your code cooperates with progressbars correctly.
    """
    if _pbar:
        _pbar.write(msg, **kwargs)
    else:
        print(msg, **kwargs)


def print_wrapped(msg: str, msgtype: str = "", **kwargs: Any) -> None:
    cols = kwargs.pop("cols", shutil.get_terminal_size()[0]) - kwargs.pop("redge", 0)
    tw = _TextWrapper(width=max(cols, 20), subsequent_indent=kwargs.pop("indent", len(strip_ANSI(msgtype)) * " "))
    ttywrite(tw.fill(msgtype + msg), **kwargs)


def _tag(level: str, marker: str, label: str) -> str:
    hl, color = _palette[level]
    return "%s%s%s %s: %s" % (hl, marker, color, label, _reset)


def print_error(message: str, **kwargs: Any) -> None:
    print_wrapped(message, _tag("error", "***", "ERROR"), **kwargs)


def print_warning(message: str, **kwargs: Any) -> None:
    print_wrapped(message, _tag("warning", "***", "WARNING"), **kwargs)


def print_info(message: str, **kwargs: Any) -> None:
    print_wrapped(message, _tag("info", "*", "Info"), **kwargs)


def print_verbose(message: str, **kwargs: Any) -> None:
    if enable_verbose_output or enable_debug_output:
        print_wrapped(message, _tag("verbose", "*", "Stage"), **kwargs)


def print_debug(message: str, **kwargs: Any) -> None:
    if enable_debug_output:
        print_wrapped(message, _tag("debug", "*", "Debug"), **kwargs)


def success(message: str) -> None:
    print_wrapped("%s%s%s" % (_palette["success"][1], message, _reset))


def highlight(message: str) -> str:
    return "%s%s%s" % (_palette["highlight"][1], message, _reset)


class ErrorMessage(Exception):
    def __init__(self, ansi_msg: str, exitcode: int = 1) -> None:
        super().__init__(ansi_msg)
        self.ansi_msg = ansi_msg
        self.exitcode = exitcode

    def __str__(self) -> str:
        return strip_ANSI(self.ansi_msg)


class ConfigError(ErrorMessage):
    """
    The run configuration is invalid. Raised before any data is touched.
    """
    def __init__(self, ansi_msg: str) -> None:
        super().__init__(ansi_msg, exitcode=2)


class DataError(ErrorMessage):
    """
    Input files, datasets or persisted models are unusable.
    """
    def __init__(self, ansi_msg: str) -> None:
        super().__init__(ansi_msg, exitcode=3)


class ParameterError(ErrorMessage):
    def __init__(self, ansi_msg: str) -> None:
        super().__init__(ansi_msg, exitcode=4)


class ContractError(ErrorMessage):
    """
    A component was used against the fit/transform/predict contract (e.g. transform before fit).
    """
    def __init__(self, ansi_msg: str) -> None:
        super().__init__(ansi_msg, exitcode=4)


class StageError(ErrorMessage):
    """
    Wraps an error raised inside a named run stage. Keeps the wrapped error's exit code.
    """
    def __init__(self, stage: str, cause: ErrorMessage, hint: str = "") -> None:
        msg = "Stage %s failed: %s" % (highlight(stage), cause.ansi_msg)
        if hint:
            msg += "\n  Hint: %s" % hint
        super().__init__(msg, exitcode=cause.exitcode)
        self.stage = stage
        self.cause = cause
        self.hint = hint


def not_builtin(kind: str, name: str, builtin: List[str]) -> ParameterError:
    return ParameterError("%s %s is not built-in; supply it via an extension wrapper (built-in: %s)" %
                          (kind, highlight(name), ", ".join(builtin)))
