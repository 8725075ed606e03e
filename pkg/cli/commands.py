"""
CLI Commands
generate / split / train / predict / evaluate / explain / cv / stats.

Results go to stdout, diagnostics to stderr. Every command validates its
flags before writing anything and emits one run manifest.
"""

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from core.config import (
    DEFAULT_N_JOBS,
    DEFAULT_SEED,
    LOG_LEVEL,
    build_section,
    class_name,
    load_run_config,
)
from core.errors import ArtifactIOError, InvalidConfig, YNoteError
from core.pipeline import classify_text, cross_validate, evaluate_model, train_pipeline
from core.run_manifest import RunManifest, default_manifest_path, same_paths
from core.schema_validator import validate_eval_report, validate_generator_config
from core.utils import canonical_json
from core.ynote import TokenizePolicy
from stages.corpus import corpus_statistics, load_corpus, save_corpus
from stages.evaluation import SplitSpec, stratified_split
from stages.features import VectorizerConfig
from stages.generators import default_generator_config, generate_corpus
from stages.model import SCHEMA_VERSION, Sign, TrainConfig, load_model, save_model, top_features
from stages.resample import SmoteConfig

logger = logging.getLogger(__name__)

SPLIT_FILES = ("train.tsv", "val.tsv", "test.tsv")


def configure_logging(verbose: bool) -> None:
    level = logging.INFO if verbose else getattr(logging, LOG_LEVEL, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _check_not_input(outputs: Sequence[Optional[str]], inputs: Sequence[Optional[str]]) -> None:
    for out in outputs:
        for src in inputs:
            if out and src and same_paths(out, src):
                raise InvalidConfig(f"Refusing to overwrite input file {src}")


def _seed(args, config: dict, section: str) -> int:
    if args.seed is not None:
        return args.seed
    value = config.get(section, {}).get("seed", DEFAULT_SEED)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise InvalidConfig(f"'{section}' seed must be a non-negative integer, got {value!r}")
    return value


def _vectorizer_config(args, config: dict) -> VectorizerConfig:
    flags = {
        "ngram_min": args.ngram_min,
        "ngram_max": args.ngram_max,
        "max_features": args.max_features,
        "min_df": args.min_df,
        "max_df": args.max_df,
    }
    return build_section(VectorizerConfig, "vectorizer", config.get("vectorizer"), flags)


def _train_config(args, config: dict) -> TrainConfig:
    flags = {"class_weight": args.class_weight, "seed": args.seed, "n_jobs": args.n_jobs}
    base = {"n_jobs": DEFAULT_N_JOBS, "seed": DEFAULT_SEED}
    return build_section(TrainConfig, "train", base, config.get("train"), flags)


def _smote_config(args, config: dict) -> Optional[SmoteConfig]:
    if args.no_smote:
        return None
    return build_section(SmoteConfig, "smote", {"seed": DEFAULT_SEED}, config.get("smote"), {"seed": args.seed})


def _manifest_path(args, out: Optional[str]) -> Optional[str]:
    return args.manifest if args.manifest else default_manifest_path(out)


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_generate(args) -> int:
    config = load_run_config(args.config)
    generator = config.get("generator") or default_generator_config(args.profile)
    validate_generator_config(generator)
    seed = _seed(args, {"generator": generator}, "generator")
    manifest = RunManifest(command="generate", config={"generator": generator})
    manifest.record_seed("generator", seed)

    with manifest.timed("generate"):
        songs = generate_corpus(generator, seed)
    save_corpus(songs, args.out)
    manifest.record_output(args.out)
    manifest.write(_manifest_path(args, args.out))
    _emit(f"Wrote {len(songs)} songs to {args.out}")
    return 0


def cmd_split(args) -> int:
    config = load_run_config(args.config)
    flags = {"seed": args.seed}
    if args.ratios is not None:
        flags.update(train=args.ratios[0], val=args.ratios[1], test=args.ratios[2])
    if args.unstratified:
        flags["stratified"] = False
    spec = build_section(SplitSpec, "split", {"seed": DEFAULT_SEED}, config.get("split"), flags)
    outputs = [os.path.join(args.out, name) for name in SPLIT_FILES]
    _check_not_input(outputs, [args.corpus])

    manifest = RunManifest(command="split", config={"split": spec.to_dict()})
    manifest.record_seed("split", spec.seed)
    manifest.record_input(args.corpus)
    corpus = load_corpus(args.corpus)
    with manifest.timed("split"):
        parts = stratified_split(corpus.labels(), spec)

    os.makedirs(args.out, exist_ok=True)
    for path, idx in zip(outputs, parts):
        save_corpus(corpus.subset(idx).songs, path)
        manifest.record_output(path)
    manifest.write(_manifest_path(args, args.out))
    _emit(" ".join(f"{name}={len(idx)}" for name, idx in zip(("train", "val", "test"), parts)))
    return 0


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    vectorizer = _vectorizer_config(args, config)
    train_config = _train_config(args, config)
    smote = _smote_config(args, config)
    _check_not_input([args.out], [args.corpus, args.val])

    manifest = RunManifest(
        command="train",
        config={
            "vectorizer": vectorizer.to_dict(),
            "train": train_config.to_dict(),
            "smote": smote.to_dict() if smote is not None else None,
        },
        schema_versions={"model": SCHEMA_VERSION},
    )
    manifest.record_seed("train", train_config.seed)
    if smote is not None:
        manifest.record_seed("smote", smote.seed)

    manifest.record_input(args.corpus)
    train_songs = load_corpus(args.corpus).songs
    val_songs = None
    if args.val:
        manifest.record_input(args.val)
        val_songs = load_corpus(args.val).songs

    with manifest.timed("train"):
        result = train_pipeline(train_songs, vectorizer, train_config, smote, val_songs)
    save_model(result.model, args.out)
    manifest.record_output(args.out)
    manifest.write(_manifest_path(args, args.out))
    _emit(canonical_json(result.summary()))
    return 0


def cmd_predict(args) -> int:
    text = args.ynote if args.ynote not in (None, "-") else sys.stdin.read()
    policy = TokenizePolicy.TRUNCATE_TAIL if args.truncate_tail else TokenizePolicy.STRICT
    manifest = RunManifest(command="predict", config={"policy": policy.value})
    manifest.record_input(args.model)

    model = load_model(args.model)
    with manifest.timed("predict"):
        label, probs = classify_text(model, text, policy)
    manifest.write(_manifest_path(args, None))

    lines = [class_name(label)]
    lines += [f"{name}\t{p:.6f}" for name, p in zip(model.class_names, probs)]
    _emit("\n".join(lines))
    return 0


def cmd_evaluate(args) -> int:
    _check_not_input([args.out], [args.model, args.corpus])
    manifest = RunManifest(command="evaluate", schema_versions={"eval_report": 1})
    manifest.record_input(args.model)
    manifest.record_input(args.corpus)

    model = load_model(args.model)
    songs = load_corpus(args.corpus).songs
    with manifest.timed("evaluate"):
        report = evaluate_model(model, songs)

    if args.out:
        data = report.to_dict()
        validate_eval_report(data)
        _write_text(args.out, canonical_json(data))
        manifest.record_output(args.out)
    manifest.write(_manifest_path(args, args.out))
    _emit(report.format_table())
    return 0


def format_explanation(model, k: int) -> str:
    """Per-class top-k positive and most-negative n-grams with coefficients."""
    blocks = []
    for label in model.classes:
        name = class_name(label)
        for sign, title in ((Sign.POSITIVE, "positive"), (Sign.NEGATIVE, "negative")):
            ranked = top_features(model, label, k, sign)
            lines = [f"{name}: top {k} {title}"]
            lines += [f"  {i:>2}. {ngram.text:<16} {coef:+.4f}" for i, (ngram, coef) in enumerate(ranked, start=1)]
            if not ranked:
                lines.append("  (none)")
            blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def cmd_explain(args) -> int:
    if args.top_k < 0:
        raise InvalidConfig(f"--top-k must be >= 0, got {args.top_k}")
    _check_not_input([args.out], [args.model])
    manifest = RunManifest(command="explain", config={"top_k": args.top_k})
    manifest.record_input(args.model)

    model = load_model(args.model)
    text = format_explanation(model, args.top_k)
    if args.out:
        _write_text(args.out, text + "\n")
        manifest.record_output(args.out)
    manifest.write(_manifest_path(args, args.out))
    _emit(text)
    return 0


def cmd_cv(args) -> int:
    config = load_run_config(args.config)
    if args.folds < 2:
        raise InvalidConfig(f"--folds must be >= 2, got {args.folds}")
    vectorizer = _vectorizer_config(args, config)
    train_config = _train_config(args, config)
    smote = _smote_config(args, config)
    seed = _seed(args, config, "split")
    _check_not_input([args.out], [args.corpus])

    manifest = RunManifest(
        command="cv",
        config={
            "folds": args.folds,
            "vectorizer": vectorizer.to_dict(),
            "train": train_config.to_dict(),
            "smote": smote.to_dict() if smote is not None else None,
        },
    )
    manifest.record_seed("folds", seed)
    manifest.record_input(args.corpus)
    songs = load_corpus(args.corpus).songs

    with manifest.timed("cv"):
        result = cross_validate(songs, args.folds, seed, vectorizer, train_config, smote,
                                n_jobs=train_config.n_jobs)
    if args.out:
        _write_text(args.out, canonical_json(result.to_dict()))
        manifest.record_output(args.out)
    manifest.write(_manifest_path(args, args.out))

    lines = [f"fold {f.fold}: {f.accuracy:.4f}" for f in result.folds]
    lines.append(f"{args.folds}-fold CV accuracy: {result.mean:.4f} ± {result.std:.4f}")
    _emit("\n".join(lines))
    return 0


def cmd_stats(args) -> int:
    manifest = RunManifest(command="stats")
    manifest.record_input(args.corpus)
    stats = corpus_statistics(load_corpus(args.corpus).songs)
    manifest.write(_manifest_path(args, None))
    _emit(canonical_json(stats))
    return 0


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactIOError(f"Cannot write {path}: {e}")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help=f"Base seed (default {DEFAULT_SEED})")
    parser.add_argument("--config", default=None, help="JSON config with vectorizer/smote/train/split/generator sections")
    parser.add_argument("--manifest", default=None, help="Run manifest path (default <out>.manifest.json)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log stage progress to stderr")


def _training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ngram-min", type=int, default=None, help="Smallest n-gram (default 1)")
    parser.add_argument("--ngram-max", type=int, default=None, help="Largest n-gram (default 3)")
    parser.add_argument("--max-features", type=int, default=None, help="Vocabulary cap (default 8000)")
    parser.add_argument("--min-df", type=int, default=None, help="Minimum document count (default 3)")
    parser.add_argument("--max-df", type=float, default=None, help="Maximum document fraction (default 0.95)")
    parser.add_argument("--no-smote", action="store_true", help="Skip SMOTE oversampling")
    parser.add_argument("--class-weight", choices=["balanced", "uniform"], default=None,
                        help="Per-sample loss weights (default balanced)")
    parser.add_argument("--n-jobs", type=int, default=None, help=f"Parallel fits (default {DEFAULT_N_JOBS})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m cli",
                                     description="YNote melody source classifier (Native / Algorithm / LLM)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Write a synthetic three-source corpus")
    _common(p)
    p.add_argument("--out", required=True, help="Corpus file to write")
    p.add_argument("--profile", choices=["balanced", "imbalanced"], default="balanced",
                   help="Shipped generator config (300/300/300 or 100/1000/200)")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("split", help="Stratified train/val/test split")
    _common(p)
    p.add_argument("corpus", help="Corpus file")
    p.add_argument("--out", required=True, help="Directory for train.tsv, val.tsv, test.tsv")
    p.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"), default=None,
                   help="Split ratios (default 0.65 0.15 0.20)")
    p.add_argument("--unstratified", action="store_true", help="Ignore labels when splitting")
    p.set_defaults(handler=cmd_split)

    p = sub.add_parser("train", help="Fit vocabulary, SMOTE and OvR model on a training corpus")
    _common(p)
    _training_flags(p)
    p.add_argument("corpus", help="Training corpus")
    p.add_argument("--out", required=True, help="Model artifact to write")
    p.add_argument("--val", default=None, help="Validation corpus scored after training")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", help="Classify one YNote string")
    _common(p)
    p.add_argument("ynote", nargs="?", default=None, help="YNote string ('-' or omitted: read stdin)")
    p.add_argument("--model", required=True, help="Model artifact")
    p.add_argument("--truncate-tail", action="store_true", help="Drop a trailing partial token instead of failing")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", help="Report metrics on a labeled corpus")
    _common(p)
    p.add_argument("corpus", help="Test corpus")
    p.add_argument("--model", required=True, help="Model artifact")
    p.add_argument("--out", default=None, help="Write the structured report as JSON")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("explain", help="Top n-grams per class by coefficient")
    _common(p)
    p.add_argument("--model", required=True, help="Model artifact")
    p.add_argument("--top-k", type=int, default=10, help="N-grams per list (default 10)")
    p.add_argument("--out", default=None, help="Also write the table to a file")
    p.set_defaults(handler=cmd_explain)

    p = sub.add_parser("cv", help="Stratified k-fold cross-validation of the full pipeline")
    _common(p)
    _training_flags(p)
    p.add_argument("corpus", help="Corpus file")
    p.add_argument("--folds", type=int, default=5, help="Number of folds (default 5)")
    p.add_argument("--out", default=None, help="Write per-fold results as JSON")
    p.set_defaults(handler=cmd_cv)

    p = sub.add_parser("stats", help="Per-class song counts, lengths and rest-token frequencies")
    _common(p)
    p.add_argument("corpus", help="Corpus file")
    p.set_defaults(handler=cmd_stats)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except YNoteError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("Unexpected failure in %s", args.command)
        print(f"error: {e}", file=sys.stderr)
        return 1
