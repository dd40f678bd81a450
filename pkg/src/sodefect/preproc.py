"""Shared source-code normalization and tokenization.

The same two functions feed model training, vector inference and the
fingerprint baseline, so any change here invalidates trained models.
"""

from __future__ import annotations

import re

STR = "STR"

# Languages whose line comments start with '#'; everything else is C family.
_HASH_COMMENT_LANGUAGES = {"python"}

_STRING_RE = re.compile(
    r'"""(?:\\.|[^\\])*?(?:"""|\Z)'
    r"|'''(?:\\.|[^\\])*?(?:'''|\Z)"
    r'|"(?:\\.|[^"\\\n])*(?:"|$)'
    r"|'(?:\\.|[^'\\\n])*(?:'|$)"
    r"|`(?:\\.|[^`\\])*(?:`|\Z)",
    re.DOTALL | re.MULTILINE,
)

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<str>" + _STRING_RE.pattern + r")"
    r"|(?P<ident>[^\W\d]\w*)"
    r"|(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?\w*)"
    r"|(?P<punct>.)",
    re.DOTALL | re.MULTILINE,
)


_C_COMMENT_RE = re.compile(
    r"(?P<str>" + _STRING_RE.pattern + r")|(?P<comment>/\*.*?(?:\*/|\Z)|//[^\n]*)",
    re.DOTALL | re.MULTILINE,
)
_HASH_COMMENT_RE = re.compile(
    r"(?P<str>" + _STRING_RE.pattern + r")|(?P<comment>#[^\n]*)",
    re.DOTALL | re.MULTILINE,
)


def _keep_strings(m: re.Match) -> str:
    return " " if m.lastgroup == "comment" else m.group()


def strip_comments(code: str, language: str = "C") -> str:
    """Replace comments with a single space, leaving string literals intact.

    An unterminated block comment swallows the rest of the input.
    """
    pattern = _HASH_COMMENT_RE if language.lower() in _HASH_COMMENT_LANGUAGES else _C_COMMENT_RE
    return pattern.sub(_keep_strings, code)


def normalize(code: str, language: str = "C") -> str:
    """Strip comments and collapse whitespace runs to single spaces.

    >>> normalize("int x; // note")
    'int x;'
    >>> normalize("a\\n\\n\\n b")
    'a b'
    """
    return " ".join(strip_comments(code, language).split())


def tokenize(code: str) -> list[str]:
    """Split code into identifier, number and single-character tokens.

    String and character literals collapse to the ``STR`` sentinel.

    >>> tokenize("x=y+1;")
    ['x', '=', 'y', '+', '1', ';']
    >>> tokenize('print("hi")')
    ['print', '(', 'STR', ')']
    """
    tokens: list[str] = []
    for m in _TOKEN_RE.finditer(code):
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append(STR if kind == "str" else m.group())
    return tokens


def preprocess(code: str, language: str = "C") -> list[str]:
    return tokenize(normalize(code, language))
