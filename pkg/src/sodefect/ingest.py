"""Posts-dump parsing, code fragment extraction and training corpus loading."""

from __future__ import annotations

import enum
import html
import json
import logging
import os
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .languages import EXTENSIONS, LANGUAGES, TAG_TO_LANGUAGE, canonical_language
from .preproc import preprocess

log = logging.getLogger(__name__)

MIN_CODE_CHARS = 100

_TAG_RE = re.compile(r"<([^<>]+)>")
# <pre><code>...</code></pre> blocks, or a bare <code> span (filtered by size later)
_BLOCK_RE = re.compile(
    r"<pre[^>]*>\s*<code[^>]*>(?P<pre>.*?)</code>\s*</pre>"
    r"|<code[^>]*>(?P<inline>.*?)</code>",
    re.DOTALL | re.IGNORECASE,
)
_HTML_TAG_RE = re.compile(r"<[^>]+>")


class IngestError(RuntimeError):
    pass


class CorpusError(ValueError):
    pass


class PostType(str, enum.Enum):
    QUESTION = "Question"
    ANSWER = "Answer"


_POST_TYPE_IDS = {"1": PostType.QUESTION, "2": PostType.ANSWER}


@dataclass(frozen=True)
class SOPost:
    post_id: int
    post_type: PostType
    score: int
    tags: tuple[str, ...]
    title: str = ""
    body: str = ""
    parent_id: int | None = None

    @property
    def languages(self) -> set[str]:
        return {TAG_TO_LANGUAGE[t] for t in self.tags if t in TAG_TO_LANGUAGE}

    @property
    def language(self) -> str | None:
        """Language of the first tag that maps into the supported set."""
        for t in self.tags:
            if t in TAG_TO_LANGUAGE:
                return TAG_TO_LANGUAGE[t]
        return None

    def to_record(self) -> dict:
        return {
            "postId": self.post_id,
            "postType": self.post_type.value,
            "score": self.score,
            "tags": list(self.tags),
            "title": self.title,
            "parentId": self.parent_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SOPost":
        return cls(
            post_id=int(rec["postId"]),
            post_type=PostType(rec["postType"]),
            score=int(rec["score"]),
            tags=tuple(rec.get("tags", ())),
            title=rec.get("title", ""),
            body=rec.get("body", ""),
            parent_id=rec.get("parentId"),
        )


@dataclass(frozen=True)
class CodeFragment:
    post_id: int
    frag_id: int
    code: str
    preceding_text: str
    language: str

    @property
    def key(self) -> tuple[int, int]:
        return (self.post_id, self.frag_id)

    def to_record(self) -> dict:
        # Field order is part of the interchange format.
        return {
            "postId": self.post_id,
            "fragId": self.frag_id,
            "language": self.language,
            "precedingText": self.preceding_text,
            "code": self.code,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CodeFragment":
        return cls(
            post_id=int(rec["postId"]),
            frag_id=int(rec["fragId"]),
            code=rec["code"],
            preceding_text=rec["precedingText"],
            language=rec["language"],
        )


@dataclass
class ParseStats:
    rows: int = 0
    posts: int = 0
    skipped_types: int = 0
    malformed: int = 0


def _parse_tags(raw: str) -> tuple[str, ...]:
    tags = _TAG_RE.findall(raw)
    if not tags and raw:
        # newer dumps use |java|python| instead of <java><python>
        tags = [t for t in raw.split("|") if t]
    return tuple(t.strip().lower() for t in tags)


def parse_posts_dump(stream: IO[bytes] | str | os.PathLike, stats: ParseStats | None = None) -> Iterator[SOPost]:
    """Stream SOPost records out of a Posts.xml dump.

    Only question (PostTypeId=1) and answer (PostTypeId=2) rows are yielded.
    Rows with missing or non-numeric required attributes are counted in
    ``stats.malformed`` and skipped. An unparseable document raises
    IngestError.
    """
    if stats is None:
        stats = ParseStats()
    try:
        context = ET.iterparse(stream, events=("end",))
        for _event, elem in context:
            if elem.tag != "row":
                continue
            stats.rows += 1
            a = elem.attrib
            try:
                post_type = _POST_TYPE_IDS.get(a["PostTypeId"].strip())
                if post_type is None:
                    stats.skipped_types += 1
                    continue
                parent = a.get("ParentId")
                post = SOPost(
                    post_id=int(a["Id"]),
                    post_type=post_type,
                    score=int(a["Score"]),
                    tags=_parse_tags(a.get("Tags", "")),
                    title=a.get("Title", ""),
                    body=a.get("Body", ""),
                    parent_id=int(parent) if parent else None,
                )
                if post.post_id <= 0:
                    raise ValueError("non-positive Id")
            except (KeyError, ValueError) as exc:
                stats.malformed += 1
                log.debug("skipping malformed row %r: %s", a.get("Id"), exc)
                continue
            finally:
                elem.clear()
            stats.posts += 1
            yield post
    except ET.ParseError as exc:
        raise IngestError(f"unreadable posts dump: {exc}") from exc
    except OSError as exc:
        raise IngestError(f"cannot read posts dump: {exc}") from exc
    if stats.malformed:
        log.warning("skipped %d malformed rows", stats.malformed)


def inherit_tags(posts: Iterable[SOPost]) -> list[SOPost]:
    """Give answers the tags of their parent question.

    Answers whose parent is absent from the dump keep their own (usually
    empty) tags, which drops their fragments at the language filter.
    """
    posts = list(posts)
    question_tags = {p.post_id: p.tags for p in posts if p.post_type is PostType.QUESTION}
    out = []
    for p in posts:
        if p.post_type is PostType.ANSWER and not p.tags and p.parent_id in question_tags:
            p = SOPost(p.post_id, p.post_type, p.score, question_tags[p.parent_id], p.title, p.body, p.parent_id)
        out.append(p)
    return out


def non_whitespace_length(text: str) -> int:
    return sum(1 for ch in text if not ch.isspace())


def _narrative(fragment_html: str) -> str:
    return " ".join(html.unescape(_HTML_TAG_RE.sub(" ", fragment_html)).split())


def extract_fragments(post: SOPost) -> list[CodeFragment]:
    """Split a post body into (preceding narrative, code) fragments.

    ``<pre><code>`` regions are always code blocks. A bare inline ``<code>``
    span only counts as a block when it is large enough to pass the size
    constraint; otherwise it stays part of the narrative.
    """
    language = post.language
    if language is None:
        return []
    frags: list[CodeFragment] = []
    narrative_start = 0
    for m in _BLOCK_RE.finditer(post.body):
        raw = m.group("pre") if m.group("pre") is not None else m.group("inline")
        code = html.unescape(raw)
        if m.group("pre") is None and non_whitespace_length(code) <= MIN_CODE_CHARS:
            continue
        if not code.strip():
            continue
        frags.append(
            CodeFragment(
                post_id=post.post_id,
                frag_id=len(frags),
                code=code,
                preceding_text=_narrative(post.body[narrative_start : m.start()]),
                language=language,
            )
        )
        narrative_start = m.end()
    return frags


def accept_fragment(frag: CodeFragment) -> bool:
    """Size and tag constraint: >100 non-whitespace chars, language in L."""
    return frag.language in LANGUAGES and non_whitespace_length(frag.code) > MIN_CODE_CHARS


def write_jsonl(records: Iterable[dict], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | os.PathLike) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_fragments(frags: Iterable[CodeFragment], path: str | os.PathLike) -> int:
    return write_jsonl((f.to_record() for f in frags), path)


def read_fragments(path: str | os.PathLike) -> list[CodeFragment]:
    return [CodeFragment.from_record(r) for r in read_jsonl(path)]


@dataclass
class IngestResult:
    posts: list[SOPost]
    fragments: list[CodeFragment]
    stats: ParseStats
    rejected: int = 0


def ingest_dump(stream: IO[bytes] | str | os.PathLike) -> IngestResult:
    """Parse a dump, inherit answer tags, extract and filter fragments."""
    stats = ParseStats()
    posts = inherit_tags(parse_posts_dump(stream, stats))
    accepted: list[CodeFragment] = []
    rejected = 0
    for post in posts:
        for frag in extract_fragments(post):
            if accept_fragment(frag):
                accepted.append(frag)
            else:
                rejected += 1
    return IngestResult(posts=posts, fragments=accepted, stats=stats, rejected=rejected)


@dataclass
class CorpusManifest:
    language: str
    documents: list[tuple[int, list[str]]]
    source_description: str = ""
    # Repository selection metadata (stars, file counts); recorded, not enforced.
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.documents)

    def token_lists(self) -> list[list[str]]:
        return [toks for _, toks in self.documents]

    def meets_selection_criteria(self, min_stars: int = 100, min_files: int = 1000) -> bool | None:
        """Check recorded repository metadata; None when nothing was recorded."""
        stars = self.provenance.get("stars")
        files = self.provenance.get("repoFiles")
        if stars is None or files is None:
            return None
        return stars >= min_stars and files > min_files


def load_training_corpus(root: str | os.PathLike, language: str, provenance: dict | None = None) -> CorpusManifest:
    """One tokenized document per source file under ``root``, in path order."""
    language = canonical_language(language)
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus directory not found: {root}")
    exts = EXTENSIONS[language]
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in exts),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    docs: list[tuple[int, list[str]]] = []
    for path in paths:
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError as exc:
            log.warning("skipping unreadable file %s: %s", path, exc)
            continue
        tokens = preprocess(text, language)
        if not tokens:
            log.warning("skipping empty file %s", path)
            continue
        docs.append((len(docs), tokens))
    if not docs:
        raise CorpusError(f"empty corpus: no {language} files under {root}")
    return CorpusManifest(language, docs, source_description=str(root), provenance=dict(provenance or {}))
