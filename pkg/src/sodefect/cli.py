"""Command-line entry point: ``sodefect <command> [options]``.

Artifacts live under ``$SODEFECT_DATA_ROOT/v1/`` (default ``./data/v1``)::

    ingest/   fragments.jsonl, posts.jsonl, stats.json
    model/    <language>.pvm
    store/    vectors.bin, index.jsonl, reference.json, scores.jsonl
    reports/  review and bench reports

A config file (``--config run.ini``) may set any option; flags win.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import random
import sys
from pathlib import Path

from . import __version__
from .bench import bench_compare, synthetic_bench_stores
from .defect import DefectThresholds, estimate_post, score_statistics
from .ingest import (
    CorpusError,
    IngestError,
    SOPost,
    ingest_dump,
    load_training_corpus,
    read_fragments,
    read_jsonl,
    write_fragments,
    write_jsonl,
)
from .languages import UnsupportedLanguageError, canonical_language
from .metrics import compute_metrics
from .preproc import preprocess
from .pv import ModelError, TrainingConfig, infer_vector, load_model, save_model, train
from .review import DEFAULT_K, ReviewError, review_file
from .vectorstore import ScoredPost, StoreError, VectorStore
from .winnowing import FingerprintError, FingerprintStore, fingerprint_text

log = logging.getLogger("sodefect")

LAYOUT_VERSION = "v1"
DATA_ROOT_ENV = "SODEFECT_DATA_ROOT"


class CLIError(RuntimeError):
    pass


def data_root() -> Path:
    return Path(os.environ.get(DATA_ROOT_ENV, "data")) / LAYOUT_VERSION


def _default(sub: str, name: str = "") -> Path:
    p = data_root() / sub
    return p / name if name else p


def _load_config(path: str | None) -> dict[str, dict[str, str]]:
    if not path:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise CLIError(f"config file not found: {path}")
    return {s: dict(cp[s]) for s in cp.sections()}


def _cfg(args, section: str, key: str, cast=str, default=None):
    """Flag value if given, else config value, else default."""
    v = getattr(args, key, None)
    if v is not None:
        return v
    raw = args.config_values.get(section, {}).get(key)
    if raw is None:
        return default
    if cast is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return cast(raw)


def _training_config(args) -> TrainingConfig:
    base = TrainingConfig()
    values = {}
    for name in TrainingConfig.__dataclass_fields__:
        cast = float if isinstance(getattr(base, name), float) else int
        values[name] = _cfg(args, "train", name, cast, getattr(base, name))
    if getattr(args, "seed", None) is None and "seed" not in args.config_values.get("train", {}):
        values["seed"] = _cfg(args, "run", "seed", int, base.seed)
    return TrainingConfig(**values)


def _thresholds(args) -> DefectThresholds:
    return DefectThresholds(
        question=_cfg(args, "thresholds", "question_threshold", float, 1.0),
        answer=_cfg(args, "thresholds", "answer_threshold", float, 1.9),
    )


def _alpha_overrides(args) -> dict:
    out = {}
    for lang, v in args.config_values.get("alpha_hat", {}).items():
        out[canonical_language(lang)] = float(v)
    for item in getattr(args, "alpha_hat", None) or []:
        lang, _, v = item.partition("=")
        out[canonical_language(lang)] = float(v)
    return out


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args) -> int:
    dump = Path(_cfg(args, "paths", "dump"))
    out = Path(_cfg(args, "paths", "ingest_dir", default=_default("ingest")))
    if not dump.is_file():
        raise CLIError(f"posts dump not found: {dump}")
    res = ingest_dump(dump)
    out.mkdir(parents=True, exist_ok=True)
    write_fragments(res.fragments, out / "fragments.jsonl")
    write_jsonl((p.to_record() for p in res.posts), out / "posts.jsonl")
    stats = {
        "rows": res.stats.rows,
        "posts": res.stats.posts,
        "skippedTypes": res.stats.skipped_types,
        "malformed": res.stats.malformed,
        "fragments": len(res.fragments),
        "rejectedFragments": res.rejected,
    }
    _write_text(out / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(f"ingested {res.stats.posts} posts, {len(res.fragments)} fragments "
          f"({res.rejected} rejected, {res.stats.malformed} malformed rows) -> {out}")
    return 0


def cmd_train(args) -> int:
    language = canonical_language(_cfg(args, "run", "language"))
    corpus_dir = _cfg(args, "paths", "corpus")
    if corpus_dir is None:
        raise CLIError("--corpus is required")
    model_path = Path(_cfg(args, "paths", "model", default=_default("model", f"{language}.pvm")))
    config = _training_config(args)
    corpus = load_training_corpus(corpus_dir, language)
    model = train(corpus, config)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    last = model.loss_history[-1] if model.loss_history else float("nan")
    print(f"trained {language} model on {min(len(corpus), config.max_samples)} documents "
          f"(vocab {len(model.vocab)}, final loss {last:.4f}) -> {model_path}")
    return 0


def _models_from(paths: list[str]) -> dict:
    models = {}
    for p in paths:
        if not Path(p).is_file():
            raise CLIError(f"model not found: {p}")
        m = load_model(p)
        models[m.language] = m
    return models


def cmd_index(args) -> int:
    frag_path = Path(_cfg(args, "paths", "fragments", default=_default("ingest", "fragments.jsonl")))
    store_dir = Path(_cfg(args, "paths", "store", default=_default("store")))
    model_paths = args.model or [_cfg(args, "paths", "model")]
    if not model_paths or model_paths == [None]:
        raise CLIError("at least one --model is required")
    if not frag_path.is_file():
        raise CLIError(f"fragments file not found: {frag_path} (run ingest first)")
    models = _models_from(model_paths)
    dims = {m.dim for m in models.values()}
    if len(dims) != 1:
        raise CLIError(f"models disagree on vector size: {sorted(dims)}")
    store = VectorStore(dims.pop())
    skipped = 0
    for frag in read_fragments(frag_path):
        model = models.get(frag.language)
        if model is None:
            skipped += 1
            continue
        vec = infer_vector(model, preprocess(frag.code, frag.language))
        store.add(frag.key, frag.language, vec)
    if not store.has_entries():
        raise CLIError("no fragments matched the supplied models' languages")
    store.freeze()
    store.save(store_dir)
    print(f"indexed {len(store)} fragments ({skipped} skipped, no model) -> {store_dir}")
    return 0


def _require_ingest(ingest_dir: Path) -> None:
    for name in ("posts.jsonl", "fragments.jsonl"):
        if not (ingest_dir / name).is_file():
            raise CLIError(f"{ingest_dir / name} not found (run ingest first)")


def cmd_score(args) -> int:
    store_dir = Path(_cfg(args, "paths", "store", default=_default("store")))
    ingest_dir = Path(_cfg(args, "paths", "ingest_dir", default=_default("ingest")))
    thresholds = _thresholds(args)
    _require_ingest(ingest_dir)
    store = VectorStore.load(store_dir)
    posts = {}
    for rec in read_jsonl(ingest_dir / "posts.jsonl"):
        p = SOPost.from_record(rec)
        posts[p.post_id] = p
    scores = {}
    for frag in read_fragments(ingest_dir / "fragments.jsonl"):
        if frag.key not in store:
            continue
        post = posts[frag.post_id]
        title = post.title or (posts[post.parent_id].title if post.parent_id in posts else "")
        scores[frag.key] = ScoredPost(estimate_post(post, frag.preceding_text, thresholds), title)
    missing = len(store) - len(scores)
    if missing:
        raise CLIError(f"{missing} indexed fragments have no post metadata in {ingest_dir}")
    store.set_scores(scores)
    store.save_scores(store_dir)
    counts = {d: sum(1 for s in scores.values() if s.delta == d) for d in (-1, 1, 300)}
    print(f"scored {len(scores)} fragments {counts} -> {store_dir}")
    return 0


def cmd_stats(args) -> int:
    ingest_dir = Path(_cfg(args, "paths", "ingest_dir", default=_default("ingest")))
    _require_ingest(ingest_dir)
    posts = [SOPost.from_record(r) for r in read_jsonl(ingest_dir / "posts.jsonl")]
    rows = []
    for (lang, ptype), s in score_statistics(posts).items():
        rows.append({"language": lang, "postType": ptype.value, **s.__dict__})
    print(json.dumps(rows, indent=2))
    return 0


def cmd_review(args) -> int:
    language = canonical_language(_cfg(args, "run", "language"))
    store_dir = Path(_cfg(args, "paths", "store", default=_default("store")))
    model_path = Path(_cfg(args, "paths", "model", default=_default("model", f"{language}.pvm")))
    if not model_path.is_file():
        raise CLIError(f"model not found: {model_path} (run train first)")
    if not (store_dir / "index.jsonl").is_file():
        raise CLIError(f"vector store not found: {store_dir} (run index first)")
    model = load_model(model_path)
    store = VectorStore.load(store_dir)
    if not store.scores:
        raise CLIError(f"vector store {store_dir} has no scores.jsonl (run score first)")
    report = review_file(
        args.file,
        language,
        model,
        store,
        _cfg(args, "run", "k", int, DEFAULT_K),
        conservative=_cfg(args, "run", "conservative", bool, False),
        seed=_cfg(args, "run", "seed", int, None),
        thresholds=_alpha_overrides(args),
    )
    text = report.dumps() if args.format == "json" else report.render_table()
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    k = _cfg(args, "run", "k", int, DEFAULT_K)
    if args.synthetic:
        store, fps, texts, vectors = synthetic_bench_stores(args.synthetic, seed=args.seed or 0)
        language = "Java"
        rng = random.Random(args.seed or 0)
        picks = sorted(rng.sample(range(len(texts)), min(args.queries, len(texts))))
        queries = [(texts[i], vectors[i]) for i in picks]
    else:
        language = canonical_language(_cfg(args, "run", "language"))
        store_dir = Path(_cfg(args, "paths", "store", default=_default("store")))
        frag_path = Path(_cfg(args, "paths", "fragments", default=_default("ingest", "fragments.jsonl")))
        model_path = Path(_cfg(args, "paths", "model", default=_default("model", f"{language}.pvm")))
        store = VectorStore.load(store_dir)
        model = load_model(model_path)
        fps = FingerprintStore()
        for frag in read_fragments(frag_path):
            if frag.key in store:
                try:
                    fps.add(frag.key, fingerprint_text(frag.code))
                except FingerprintError:
                    continue
        if not args.query:
            raise CLIError("--query files required unless --synthetic is given")
        queries = []
        for q in args.query:
            text = Path(q).read_text(encoding="utf-8", errors="replace")
            queries.append((text, infer_vector(model, preprocess(text, language)).values))
    report = bench_compare(store, fps, queries, language, k=k, repeats=args.repeats)
    text = report.dumps()
    if args.out:
        _write_text(Path(args.out), text)
    sys.stdout.write(text)
    return 0


def cmd_metrics(args) -> int:
    pairs = []
    for rec in read_jsonl(args.predictions):
        pairs.append((rec["predicted"], rec["actual"]))
    m = compute_metrics(pairs)
    sys.stdout.write(json.dumps(m.to_json(), indent=2, sort_keys=True) + "\n")
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sodefect", description="Estimate source-file defectiveness from Stack Overflow code matches.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse a Posts.xml dump into fragments")
    s.add_argument("dump", nargs="?")
    s.add_argument("--out", dest="ingest_dir")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", help="train a paragraph-vector model on a source corpus")
    s.add_argument("--corpus")
    s.add_argument("--language")
    s.add_argument("--model")
    for name, f in TrainingConfig.__dataclass_fields__.items():
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float if f.type == "float" else int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("index", help="vectorize fragments into a store")
    s.add_argument("--fragments")
    s.add_argument("--model", action="append", help="model file; repeat for several languages")
    s.add_argument("--store")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("score", help="pre-score indexed fragments for defectiveness")
    s.add_argument("--store")
    s.add_argument("--ingest", dest="ingest_dir")
    s.add_argument("--question-threshold", dest="question_threshold", type=float)
    s.add_argument("--answer-threshold", dest="answer_threshold", type=float)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("stats", help="vote-score statistics per language and post type")
    s.add_argument("--ingest", dest="ingest_dir")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("review", help="review a source file")
    s.add_argument("file")
    s.add_argument("--language")
    s.add_argument("--model")
    s.add_argument("--store")
    s.add_argument("-k", dest="k", type=int)
    s.add_argument("--conservative", action="store_const", const=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--alpha-hat", action="append", metavar="LANG=VALUE")
    s.add_argument("--format", choices=("table", "json"), default="table")
    s.add_argument("--out")
    s.set_defaults(func=cmd_review)

    s = sub.add_parser("bench", help="compare vector+pivot against fingerprint retrieval")
    s.add_argument("--store")
    s.add_argument("--fragments")
    s.add_argument("--model")
    s.add_argument("--language")
    s.add_argument("--query", action="append")
    s.add_argument("--synthetic", type=int, metavar="N", help="use N synthetic fragments instead of a store")
    s.add_argument("--queries", type=int, default=5, help="query count for --synthetic")
    s.add_argument("--repeats", type=int, default=20)
    s.add_argument("-k", dest="k", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("metrics", help="accuracy/precision/recall/F1 from a predictions JSONL")
    s.add_argument("predictions", help="JSONL with 'predicted' and 'actual' labels")
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.config_values = _load_config(args.config)
        if args.command == "ingest" and args.dump:
            args.config_values.setdefault("paths", {})["dump"] = args.dump
        if args.command == "ingest" and _cfg(args, "paths", "dump") is None:
            raise CLIError("a posts dump path is required")
        if args.command in ("train", "review") or (args.command == "bench" and not args.synthetic):
            if _cfg(args, "run", "language") is None:
                raise CLIError("--language is required")
        return args.func(args)
    except (CLIError, IngestError, CorpusError, ModelError, StoreError, ReviewError,
            UnsupportedLanguageError, FingerprintError, OSError, ValueError) as exc:
        print(f"sodefect {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
