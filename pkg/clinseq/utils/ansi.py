# -* encoding: utf-8 *-
import functools
import re
from textwrap import TextWrapper
from typing import List


strip_ANSI = functools.partial(re.compile(r"""
    \x1b     # literal ESC
    \[       # literal [
    [;\d]*   # zero or more digits or semicolons
    [A-Za-z] # a letter
    """, re.VERBOSE).sub, "")


def visible_len(text: str) -> int:
    return len(strip_ANSI(text))


def ljust(text: str, width: int) -> str:
    """
    ``str.ljust`` for strings containing colour codes.
    """
    return text + " " * max(width - visible_len(text), 0)


def rjust(text: str, width: int) -> str:
    return " " * max(width - visible_len(text), 0) + text


class ANSITextWrapper(TextWrapper):
    """
    A ``TextWrapper`` that measures chunks by their printed width, so colour codes don't cause early line breaks.
    Long words are never broken, colour codes must stay intact.
    """
    def _munge_whitespace(self, text: str) -> str:
        return text

    def _wrap_chunks(self, chunks: List[str]) -> List[str]:
        if self.width <= 0:
            raise ValueError("invalid width %r (must be > 0)" % self.width)

        lines = []  # type: List[str]
        line = []  # type: List[str]
        line_len = 0
        for chunk in chunks:
            indent = self.subsequent_indent if lines else self.initial_indent
            width = self.width - len(indent)
            chunk_len = visible_len(chunk)

            if line and line_len + chunk_len > width:
                if self.drop_whitespace and line[-1].strip() == "":
                    line.pop()
                lines.append(indent + "".join(line))
                line, line_len = [], 0
                if self.drop_whitespace and chunk.strip() == "":
                    continue

            line.append(chunk)
            line_len += chunk_len

        if line:
            if self.drop_whitespace and line[-1].strip() == "":
                line.pop()
            if line:
                lines.append((self.subsequent_indent if lines else self.initial_indent) + "".join(line))
        return lines
