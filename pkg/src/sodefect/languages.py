"""Supported language set and the lookups hanging off it."""

from __future__ import annotations

LANGUAGES = ("C", "C#", "Java", "JavaScript", "Python")

# Stack Overflow tag -> language.
TAG_TO_LANGUAGE = {
    "c": "C",
    "c#": "C#",
    "java": "Java",
    "javascript": "JavaScript",
    "python": "Python",
}

EXTENSIONS = {
    "C": (".c", ".h"),
    "C#": (".cs",),
    "Java": (".java",),
    "JavaScript": (".js", ".mjs", ".cjs"),
    "Python": (".py",),
}

_ALIASES = {
    "c": "C",
    "c#": "C#",
    "csharp": "C#",
    "cs": "C#",
    "java": "Java",
    "javascript": "JavaScript",
    "js": "JavaScript",
    "python": "Python",
    "py": "Python",
}


class UnsupportedLanguageError(ValueError):
    pass


def canonical_language(name: str) -> str:
    """Map a user-facing language name (any case, common aliases) to L."""
    try:
        return _ALIASES[name.strip().lower()]
    except KeyError:
        raise UnsupportedLanguageError(
            f"unsupported language {name!r}; expected one of {', '.join(LANGUAGES)}"
        ) from None
