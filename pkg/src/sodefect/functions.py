"""Split a source file into function-definition units.

C and Java use a signature pattern plus brace matching on a copy of the
source with comments, strings and (for C) preprocessor lines blanked out.
Python uses :mod:`ast` and falls back to an indentation scan when the file
does not parse. C# and JavaScript are always passed through whole.
"""

from __future__ import annotations

import ast
import logging
import re
from dataclasses import dataclass

from .languages import canonical_language

log = logging.getLogger(__name__)

_CONTROL = frozenset(
    "if for while switch catch synchronized return new else do try finally sizeof "
    "foreach using lock typeof defined".split()
)
_SIGNATURE_RE = re.compile(
    r"(?P<name>[A-Za-z_$][\w$]*)\s*\([^;{}()]*(?:\([^;{}()]*\)[^;{}()]*)*\)"
    r"\s*(?:const\s*)?(?:throws\s+[\w$.,\s<>]+)?\s*$"
)
_PY_DEF_RE = re.compile(r"^(?P<indent>[ \t]*)(?:async[ \t]+)?def[ \t]+(?P<name>\w+)")
_PY_CLASS_RE = re.compile(r"^(?P<indent>[ \t]*)class[ \t]+\w+")


@dataclass(frozen=True)
class FunctionUnit:
    name: str
    body_text: str
    start_line: int
    end_line: int


def _line_starts(source: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(source):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _line_of(starts: list[int], offset: int) -> int:
    lo, hi = 0, len(starts)
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if starts[mid] <= offset:
            lo = mid
        else:
            hi = mid
    return lo + 1


def _whole_file(source: str) -> list[FunctionUnit]:
    if not source:
        return []
    return [FunctionUnit("", source, 1, source.count("\n") + (0 if source.endswith("\n") else 1) or 1)]


_MASK_RE = re.compile(
    r"/\*.*?(?:\*/|\Z)"
    r"|//[^\n]*"
    r'|"(?:\\.|[^"\\\n])*(?:"|$)'
    r"|'(?:\\.|[^'\\\n])*(?:'|$)"
    r"|`(?:\\.|[^`\\])*(?:`|\Z)",
    re.DOTALL | re.MULTILINE,
)
_PREPROC_RE = re.compile(r"^[ \t]*#(?:[^\n]*\\\n)*[^\n]*", re.MULTILINE)


def _blank(m: re.Match) -> str:
    return re.sub(r"[^\n]", " ", m.group())


def mask_code(source: str, language: str) -> str:
    """Same-length copy of ``source`` with comments/literals replaced by spaces."""
    masked = _MASK_RE.sub(_blank, source)
    if language == "C":
        masked = _PREPROC_RE.sub(_blank, masked)
    return masked


def _brace_functions(source: str, language: str) -> list[FunctionUnit] | None:
    masked = mask_code(source, language)
    if masked.count("{") != masked.count("}"):
        return None
    starts = _line_starts(source)
    units: list[FunctionUnit] = []
    boundary = 0
    i = 0
    n = len(masked)
    while i < n:
        ch = masked[i]
        if ch in ";}":
            boundary = i + 1
        elif ch == "{":
            segment = masked[boundary:i]
            m = _SIGNATURE_RE.search(segment)
            head = segment[: m.start()] if m else ""
            if m and m.group("name") not in _CONTROL and "=" not in head and not re.search(r"\bnew\s*$", head):
                close = _match_brace(masked, i)
                if close is None:
                    return None
                lead = len(segment) - len(segment.lstrip())
                start = boundary + lead
                units.append(
                    FunctionUnit(
                        name=m.group("name"),
                        body_text=source[start : close + 1],
                        start_line=_line_of(starts, start),
                        end_line=_line_of(starts, close),
                    )
                )
                i = close + 1
                boundary = i
                continue
            boundary = i + 1
        i += 1
    return units


def _match_brace(masked: str, open_pos: int) -> int | None:
    depth = 0
    for j in range(open_pos, len(masked)):
        c = masked[j]
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return j
    return None


def _slice_lines(source: str, first: int, last: int) -> str:
    lines = source.splitlines(keepends=True)
    return "".join(lines[first - 1 : last])


def _python_ast(source: str) -> list[FunctionUnit]:
    tree = ast.parse(source)
    defs = (ast.FunctionDef, ast.AsyncFunctionDef)
    nodes = []
    for node in tree.body:
        if isinstance(node, defs):
            nodes.append(node)
        elif isinstance(node, ast.ClassDef):
            nodes.extend(n for n in node.body if isinstance(n, defs))
    units = []
    for node in nodes:
        first = min([node.lineno] + [d.lineno for d in node.decorator_list])
        units.append(FunctionUnit(node.name, _slice_lines(source, first, node.end_lineno), first, node.end_lineno))
    return units


def _python_indent(source: str) -> list[FunctionUnit]:
    """Indentation scan for sources :mod:`ast` rejects (e.g. Python 2)."""
    lines = source.splitlines(keepends=True)

    def indent(s: str) -> int:
        return len(s.expandtabs(4)) - len(s.expandtabs(4).lstrip())

    units = []
    class_indent: int | None = None
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip() or line.lstrip().startswith("#"):
            i += 1
            continue
        ind = indent(line)
        if class_indent is not None and ind <= class_indent:
            class_indent = None
        if _PY_CLASS_RE.match(line) and ind == 0:
            class_indent = 0
            i += 1
            continue
        m = _PY_DEF_RE.match(line)
        member = class_indent is not None and ind > class_indent
        if m and (ind == 0 or member):
            j = i + 1
            last = i
            while j < len(lines):
                s = lines[j]
                if s.strip() and not s.lstrip().startswith("#"):
                    if indent(s) <= ind:
                        break
                    last = j
                j += 1
            units.append(FunctionUnit(m.group("name"), "".join(lines[i : last + 1]), i + 1, last + 1))
            i = last + 1
            continue
        i += 1
    return units


def extract_functions(source: str, language: str) -> list[FunctionUnit]:
    """Top-level (and class-member) functions of ``source``.

    Nested functions stay inside their parent's unit. If nothing is found,
    or braces do not balance, the whole file is returned as a single unit.
    """
    language = canonical_language(language)
    if not source.strip():
        return _whole_file(source)
    if language in ("C", "Java"):
        units = _brace_functions(source, language)
        if units is None:
            log.warning("unbalanced braces; using the whole file as one unit")
            units = []
    elif language == "Python":
        try:
            units = _python_ast(source)
        except (SyntaxError, ValueError):
            units = _python_indent(source)
    else:
        units = []
    return units or _whole_file(source)
