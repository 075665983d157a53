"""Command-line surface: lexicon management, matching, training, inference.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
Results go to stdout as tab-separated key/value lines; diagnostics go to
stderr.  Settings resolve as flag > config file > built-in default; the
seed additionally honors the LEXTAG_SEED environment variable between the
flag and the config file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import tensor as T
from .data import (
    RawSentence,
    Tokenizer,
    align_labels,
    build_tokenizer,
    decode_predictions,
    parse_conll,
)
from .lexicon import LexiconError, TagVocabulary, TrieLexicon
from .matching import MatchSet, build_match_set, dump_candidates, make_candidate
from .model import LexTagModel, ModelConfig, load_checkpoint
from .training import TrainConfig, TrainExample, build_examples, evaluate, joint_loss, train
from .synthetic import SyntheticConfig, generate_synthetic, write_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

# Distinguishes "flag not given" from an explicit None (e.g. --top-n none).
_UNSET = object()

GRADCHECK_TOLERANCE = 1e-4

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise DataError(f"not a boolean: {text!r}")


def _int_or_none(text: str):
    return None if text.strip().lower() in ("none", "") else int(text)


_CONFIG_TYPES = {
    "hz": int,
    "encoder_layers": int,
    "head_count": int,
    "max_seq_length": int,
    "dict_candidate": int,
    "top_n": _int_or_none,
    "fusion_mode": str,
    "hard_threshold": float,
    "loss_weight_denoise": float,
    "dropout_rate": float,
    "sigmoid_tagger": _parse_bool,
    "use_first": _parse_bool,
    "batch_size": int,
    "learning_rate": float,
    "weight_decay": float,
    "warmup_proportion": float,
    "epochs": int,
    "seed": int,
    "teacher_forcing": _parse_bool,
    "patience": int,
    "vocab_size": int,
    "lowercase": _parse_bool,
    "char_level": _parse_bool,
}

_MODEL_KEYS = (
    "hz",
    "encoder_layers",
    "head_count",
    "max_seq_length",
    "dict_candidate",
    "top_n",
    "fusion_mode",
    "hard_threshold",
    "loss_weight_denoise",
    "dropout_rate",
    "sigmoid_tagger",
    "use_first",
)
_TRAIN_KEYS = (
    "batch_size",
    "learning_rate",
    "weight_decay",
    "warmup_proportion",
    "epochs",
    "seed",
    "teacher_forcing",
    "patience",
)


def _require_file(path: Optional[str], what: str) -> str:
    if not path:
        raise UsageError(f"missing required {what}")
    if not os.path.isfile(path):
        raise DataError(f"{what} not found: {path}")
    return path


def load_config_file(path) -> dict:
    """Parse a flat 'key = value' settings file; unknown keys are rejected."""
    settings: dict = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise DataError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            if key not in _CONFIG_TYPES:
                raise DataError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                settings[key] = _CONFIG_TYPES[key](value.strip())
            except (ValueError, DataError):
                raise DataError(f"{path}:{lineno}: bad value for {key}: {value.strip()!r}")
    return settings


def _merge_settings(args) -> dict:
    """Resolve settings: command-line flag > config file > defaults."""
    settings: dict = {}
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(load_config_file(_require_file(config_path, "config file")))
    for key in _CONFIG_TYPES:
        flag_value = getattr(args, key, _UNSET)
        if flag_value is not _UNSET:
            settings[key] = flag_value
    env_seed = os.environ.get("LEXTAG_SEED")
    if getattr(args, "seed", _UNSET) is _UNSET and env_seed is not None:
        try:
            settings["seed"] = int(env_seed)
        except ValueError:
            raise DataError(f"LEXTAG_SEED is not an integer: {env_seed!r}")
    return settings


def _split_settings(settings: dict) -> tuple[dict, dict, dict]:
    model_kw = {k: settings[k] for k in _MODEL_KEYS if k in settings}
    train_kw = {k: settings[k] for k in _TRAIN_KEYS if k in settings}
    if "loss_weight_denoise" in settings:
        train_kw["loss_weight_denoise"] = settings["loss_weight_denoise"]
    data_kw = {k: settings[k] for k in ("vocab_size", "lowercase", "char_level") if k in settings}
    return model_kw, train_kw, data_kw


# -- shared plumbing ---------------------------------------------------------


def _scan_tsv_categories(paths: Sequence[str]) -> tuple[set[str], bool]:
    """Collect category names across lexicon TSVs; detects degenerate files."""
    categories: set[str] = set()
    saw_empty = False
    for path in paths:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                category = parts[1].strip() if len(parts) > 1 else ""
                if category:
                    categories.add(category)
                else:
                    saw_empty = True
    return categories, saw_empty


def _corpus_categories(sentences: Sequence[RawSentence]) -> set[str]:
    cats: set[str] = set()
    for s in sentences:
        for _, _, c in s.spans:
            if c:
                cats.add(c)
    return cats


def _build_tag_vocab(categories: set[str], degenerate: bool) -> TagVocabulary:
    if degenerate and categories:
        raise DataError("cannot mix categorized and category-free entries/labels")
    if degenerate:
        return TagVocabulary(degenerate=True)
    return TagVocabulary(sorted(categories))


def _load_tries(
    paths: Sequence[str], tokenizer: Tokenizer, tag_vocab: TagVocabulary
) -> list[TrieLexicon]:
    stores = []
    for path in paths:
        store = TrieLexicon(tokenizer, tag_vocab)
        store.load_tsv(path)
        stores.append(store)
    return stores


def _read_variants(path: Optional[str], count: int) -> Optional[list[int]]:
    if path is None:
        return None
    variants = []
    with open(_require_file(path, "variants file"), "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                variants.append(int(line))
            except ValueError:
                raise DataError(f"{path}:{lineno}: variant ids must be integers")
    if len(variants) != count:
        raise DataError(f"{path}: {len(variants)} variant ids for {count} sentences")
    return variants


def _lexicon_tokenizer(paths: Sequence[str], extra_words: Sequence[str] = (),
                       lowercase: bool = False, char_level: bool = False) -> Tokenizer:
    """A throwaway tokenizer covering the lexicon surfaces (and extras)."""
    corpus = [surface.split() for path in paths for surface, _ in _iter_tsv(path)]
    if extra_words:
        corpus.append(list(extra_words))
    if not corpus:
        corpus = [["a"]]
    chars = {c for words in corpus for w in words for c in w}
    budget = len(chars) * 2 + 4 + 4096
    return build_tokenizer(corpus, vocab_size=budget, lowercase=lowercase, char_level=char_level)


def _iter_tsv(path):
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            yield parts[0], (parts[1].strip() if len(parts) > 1 else "")


def _checkpoint_runtime(path) -> tuple[LexTagModel, Tokenizer, TagVocabulary]:
    model, extras = load_checkpoint(_require_file(path, "checkpoint"))
    try:
        tokenizer = Tokenizer(
            extras["tokenizer_pieces"],
            lowercase=extras.get("lowercase", False),
            char_level=extras.get("char_level", False),
        )
        if extras.get("degenerate", False):
            tag_vocab = TagVocabulary(degenerate=True)
        else:
            tag_vocab = TagVocabulary(extras["categories"])
    except KeyError as err:
        raise DataError(f"{path}: checkpoint is missing runtime metadata ({err})")
    if tag_vocab.size != model.config.tag_vocab_size:
        raise DataError(
            f"{path}: checkpoint header inconsistent: tag vocabulary of {tag_vocab.size} "
            f"vs model size {model.config.tag_vocab_size}"
        )
    return model, tokenizer, tag_vocab


def _align_corpus(sentences, tokenizer, tag_vocab, max_seq_length) -> tuple[list, list[int]]:
    """Tokenize and align; drops overlong sentences with a stderr note."""
    aligned = []
    kept_idx = []
    dropped = 0
    for i, raw in enumerate(sentences):
        sent = align_labels(raw, tokenizer, tag_vocab)
        if len(sent.subword_ids) > max_seq_length:
            dropped += 1
            continue
        aligned.append(sent)
        kept_idx.append(i)
    if dropped:
        print(f"dropped {dropped} sentences over max_seq_length", file=sys.stderr)
    return aligned, kept_idx


# -- commands ------------------------------------------------------------------


def cmd_lexicon(args) -> int:
    path = _require_file(args.lexicon, "lexicon TSV")
    categories, saw_empty = _scan_tsv_categories([path])
    degenerate = saw_empty and not categories
    extra = [args.surface] if getattr(args, "surface", None) else []
    tokenizer = _lexicon_tokenizer([path], extra_words=" ".join(extra).split())
    tag_vocab = _build_tag_vocab(categories, degenerate)
    if args.action in ("add",) and args.category and not tag_vocab.degenerate:
        tag_vocab.register(args.category)
    store = TrieLexicon(tokenizer, tag_vocab)
    store.load_tsv(path)

    if args.action == "build":
        print(f"entries\t{store.entry_count}")
        return EXIT_OK
    if args.action == "stats":
        print(f"entries\t{store.entry_count}")
        print(f"max_pieces\t{store.max_entry_pieces()}")
        for category, count in store.category_histogram().items():
            print(f"category\t{category}\t{count}")
        return EXIT_OK
    if not args.surface:
        raise UsageError(f"lexicon {args.action} requires --surface")
    if args.action == "add":
        store.insert_entry(args.surface, args.category)
        store.save_tsv(path)
        print(f"entries\t{store.entry_count}")
        return EXIT_OK
    if args.action == "remove":
        if not store.remove_entry(args.surface, args.category):
            raise DataError(f"entry not found: {args.surface!r} / {args.category!r}")
        store.save_tsv(path)
        print(f"entries\t{store.entry_count}")
        return EXIT_OK
    raise UsageError(f"unknown lexicon action {args.action!r}")


def cmd_match(args) -> int:
    settings = _merge_settings(args)
    path = _require_file(args.lexicon, "lexicon TSV")
    words = args.text.split()
    if not words:
        raise UsageError("empty sentence")
    categories, saw_empty = _scan_tsv_categories([path])
    tag_vocab = _build_tag_vocab(categories, saw_empty and not categories)
    if args.tokenizer:
        tokenizer = Tokenizer.load(
            _require_file(args.tokenizer, "tokenizer file"),
            lowercase=settings.get("lowercase", False),
            char_level=settings.get("char_level", False),
        )
    else:
        tokenizer = _lexicon_tokenizer(
            [path],
            extra_words=words,
            lowercase=settings.get("lowercase", False),
            char_level=settings.get("char_level", False),
        )
    store = TrieLexicon(tokenizer, tag_vocab)
    store.load_tsv(path)
    ids = (tokenizer.bos_id, *tokenizer.encode_text(args.text), tokenizer.eos_id)
    match_set = build_match_set(
        store.snapshot(),
        ids,
        tag_vocab,
        top_n=settings.get("top_n", 1),
        dict_candidate=settings.get("dict_candidate", 16),
    )
    for line in dump_candidates(match_set, tag_vocab):
        print(line)
    return EXIT_OK


def cmd_synth(args) -> int:
    settings = _merge_settings(args)
    config = SyntheticConfig(
        ambiguity_rate=args.ambiguity_rate if args.ambiguity_rate is not None else 0.5,
        train_size=args.train_size or 2000,
        dev_size=args.dev_size or 300,
        test_size=args.test_size or 500,
    )
    data = generate_synthetic(settings.get("seed", 0), config)
    paths = write_dataset(data, args.out)
    for key in sorted(paths):
        print(f"{key}\t{paths[key]}")
    return EXIT_OK


def _prepare_training(args, settings):
    model_kw, train_kw, data_kw = _split_settings(settings)
    corpus = parse_conll(_require_file(args.corpus, "training corpus"))
    dev_corpus = parse_conll(_require_file(args.dev, "dev corpus"))
    lexicon_paths = [p for p in (args.lexicon.split(",") if args.lexicon else []) if p]
    for p in lexicon_paths:
        _require_file(p, "lexicon TSV")
    baseline = args.baseline or not lexicon_paths

    tokenizer = build_tokenizer(
        [list(s.words) for s in corpus],
        vocab_size=data_kw.get("vocab_size", 2000),
        lowercase=data_kw.get("lowercase", False),
        char_level=data_kw.get("char_level", False),
    )
    lex_cats, saw_empty = _scan_tsv_categories(lexicon_paths)
    corpus_cats = _corpus_categories(corpus) | _corpus_categories(dev_corpus)
    degenerate = not corpus_cats and (saw_empty or not lexicon_paths)
    tag_vocab = _build_tag_vocab(lex_cats | corpus_cats, degenerate)

    max_len = model_kw.get("max_seq_length", 128)
    train_sents, train_kept = _align_corpus(corpus, tokenizer, tag_vocab, max_len)
    dev_sents, dev_kept = _align_corpus(dev_corpus, tokenizer, tag_vocab, max_len)
    if not train_sents:
        raise DataError("no usable training sentences")

    model_config = ModelConfig(
        subword_vocab_size=tokenizer.vocab_size,
        tag_vocab_size=tag_vocab.size,
        label_vocab_size=tag_vocab.size,
        **model_kw,
    )
    train_config = TrainConfig(**train_kw)

    if baseline:
        empty = MatchSet(candidates=(), denoise_labels=())
        train_examples = [TrainExample(s, empty) for s in train_sents]
        dev_examples = [TrainExample(s, empty) for s in dev_sents]
    else:
        stores = _load_tries(lexicon_paths, tokenizer, tag_vocab)
        snapshots = [s.snapshot() for s in stores]
        train_var = _read_variants(args.variants, len(corpus))
        dev_var = _read_variants(args.dev_variants, len(dev_corpus))
        train_var = [train_var[i] for i in train_kept] if train_var else None
        dev_var = [dev_var[i] for i in dev_kept] if dev_var else None
        for v in (train_var or []) + (dev_var or []):
            if not 0 <= v < len(snapshots):
                raise DataError(f"variant id {v} out of range for {len(snapshots)} lexicons")
        train_examples = build_examples(train_sents, snapshots, train_var, tag_vocab, model_config)
        dev_examples = build_examples(dev_sents, snapshots, dev_var, tag_vocab, model_config)

    extras = {
        "tokenizer_pieces": tokenizer.pieces,
        "lowercase": tokenizer.lowercase,
        "char_level": tokenizer.char_level,
        "categories": list(tag_vocab.categories),
        "degenerate": tag_vocab.degenerate,
    }
    return model_config, train_config, tag_vocab, train_examples, dev_examples, extras


def cmd_train(args) -> int:
    settings = _merge_settings(args)
    (
        model_config,
        train_config,
        tag_vocab,
        train_examples,
        dev_examples,
        extras,
    ) = _prepare_training(args, settings)
    model = LexTagModel(model_config, seed=train_config.seed)
    reports, lines = train(
        model,
        train_examples,
        dev_examples,
        tag_vocab,
        train_config,
        checkpoint_path=args.out,
        checkpoint_extras=extras,
        log=lambda line: print(line, file=sys.stderr),
    )
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    print(f"checkpoint\t{args.out}")
    return EXIT_OK


def _eval_examples(args, model, tokenizer, tag_vocab):
    corpus = parse_conll(_require_file(args.corpus, "evaluation corpus"))
    sents, kept = _align_corpus(corpus, tokenizer, tag_vocab, model.config.max_seq_length)
    lexicon_paths = [p for p in (args.lexicon.split(",") if args.lexicon else []) if p]
    if not lexicon_paths:
        empty = MatchSet(candidates=(), denoise_labels=())
        return [TrainExample(s, empty) for s in sents], True
    for p in lexicon_paths:
        _require_file(p, "lexicon TSV")
    stores = _load_tries(lexicon_paths, tokenizer, tag_vocab)
    snapshots = [s.snapshot() for s in stores]
    variants = _read_variants(args.variants, len(corpus))
    variants = [variants[i] for i in kept] if variants else None
    return (
        build_examples(sents, snapshots, variants, tag_vocab, model.config),
        False,
    )


def cmd_eval(args) -> int:
    model, tokenizer, tag_vocab = _checkpoint_runtime(args.checkpoint)
    examples, baseline = _eval_examples(args, model, tokenizer, tag_vocab)
    report = evaluate(model, examples, tag_vocab, baseline=baseline)
    print(f"span_precision\t{report.span_precision:.4f}")
    print(f"span_recall\t{report.span_recall:.4f}")
    print(f"span_f1\t{report.span_f1:.4f}")
    print(f"denoise_accuracy\t{report.denoise_accuracy:.4f}")
    for category, f1 in report.per_category_f1.items():
        print(f"f1\t{category}\t{f1:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model, tokenizer, tag_vocab = _checkpoint_runtime(args.checkpoint)
    lexicon_paths = [p for p in (args.lexicon.split(",") if args.lexicon else []) if p]
    snapshot = None
    if lexicon_paths:
        store = _load_tries(lexicon_paths[:1], tokenizer, tag_vocab)[0]
        snapshot = store.snapshot()
    stream = open(args.input, "r", encoding="utf-8") if args.input else sys.stdin
    try:
        for line in stream:
            words = line.split()
            if not words:
                continue
            raw = RawSentence(tuple(words), tuple("O" for _ in words), ())
            sent = align_labels(raw, tokenizer, tag_vocab)
            if snapshot is not None:
                match_set = build_match_set(
                    snapshot,
                    sent.subword_ids,
                    tag_vocab,
                    top_n=model.config.top_n,
                    dict_candidate=model.config.dict_candidate,
                )
            else:
                match_set = MatchSet(candidates=())
            tag_ids = model.predict(sent.subword_ids, match_set)
            labels = ["O"] * len(words)
            for start, end, cid in decode_predictions(sent, tag_ids, tag_vocab):
                name = tag_vocab.category_name(cid)
                suffix = f"-{name}" if name else ""
                labels[start] = "B" + suffix
                for k in range(start + 1, end):
                    labels[k] = "I" + suffix
            for word, label in zip(words, labels):
                print(f"{word}\t{label}")
            print()
    finally:
        if args.input:
            stream.close()
    return EXIT_OK


def run_gradcheck(
    hz: int = 16,
    token_count: int = 8,
    candidate_count: int = 2,
    seed: int = 0,
    max_coords_per_tensor: int = 6,
) -> tuple[float, str]:
    """Finite-difference check of every parameter through the full model.

    Runs two arms: soft fusion (every path differentiable end to end) and
    hard fusion with a pinned selection mask (the mask itself is not a
    differentiable decision).  Returns (max relative error, worst name).
    """
    if hz > 16 or token_count > 8:
        raise UsageError("gradcheck is restricted to hz <= 16 and <= 8 tokens")
    with T.using_dtype(np.float64):
        rng = np.random.default_rng(seed)
        tag_vocab = TagVocabulary(("x", "y"))
        tokens = rng.integers(2, 24, size=token_count).tolist()
        gold = rng.integers(0, tag_vocab.size - 1, size=token_count).tolist()
        candidates = []
        for i in range(candidate_count):
            start = 1 + (i % max(token_count - 3, 1))
            end = min(start + 2, token_count - 1)
            candidates.append(make_candidate(token_count, start, end, i % 2, tag_vocab))
        labels = [bool(int(b)) for b in rng.integers(0, 2, size=candidate_count)]
        forced = tuple(i % 2 == 0 for i in range(candidate_count))

        worst = (0.0, "none")
        for mode in ("soft", "hard"):
            config = ModelConfig(
                subword_vocab_size=24,
                tag_vocab_size=tag_vocab.size,
                label_vocab_size=tag_vocab.size,
                hz=hz,
                encoder_layers=1,
                head_count=2 if hz % 2 == 0 else 1,
                max_seq_length=token_count,
                dict_candidate=max(candidate_count, 1),
                top_n=None,
                fusion_mode=mode,
                dropout_rate=0.0,
            )
            # A larger init keeps every gradient well away from the float64
            # cancellation floor of the central differences.
            model = LexTagModel(config, seed=seed, init_scale=0.3, extractor_init_scale=0.3)
            match_set = MatchSet(candidates=tuple(candidates))

            def f():
                out = model.forward(
                    tokens,
                    match_set,
                    training=False,
                    force_selection=forced if mode == "hard" else None,
                )
                return joint_loss(out, gold, labels, 1.0)

            for name, p in model.named_parameters().items():
                err = T.finite_diff_check(
                    f,
                    [p],
                    eps=1e-4,
                    max_coords_per_tensor=max_coords_per_tensor,
                    rng=np.random.default_rng(seed + 1),
                )
                if err > worst[0]:
                    worst = (err, f"{mode}:{name}")
        return worst


def cmd_gradcheck(args) -> int:
    settings = _merge_settings(args)
    err, worst = run_gradcheck(
        hz=16 if args.hz is _UNSET else args.hz,
        token_count=8 if args.tokens is _UNSET else args.tokens,
        candidate_count=2 if args.candidates is _UNSET else args.candidates,
        seed=settings.get("seed", 0),
    )
    print(f"max_rel_err\t{err:.3e}")
    print(f"worst\t{worst}")
    if err > GRADCHECK_TOLERANCE:
        print(f"gradient check failed at {worst}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_settings_flags(p: _Parser, keys: Sequence[str]) -> None:
    # The default is a sentinel, not None: "--top-n none" must parse to an
    # explicit None and still win over the config file.
    for key in keys:
        flag = "--" + key.replace("_", "-")
        coerce = _CONFIG_TYPES[key]
        if coerce is _parse_bool:
            p.add_argument(flag, dest=key, default=_UNSET, type=_parse_bool,
                           metavar="BOOL", help=argparse.SUPPRESS)
        elif key == "fusion_mode":
            p.add_argument("--fusion", dest="fusion_mode", default=_UNSET,
                           choices=("hard", "soft"))
        elif key == "top_n":
            p.add_argument("--top-n", dest="top_n", default=_UNSET, type=_int_or_none)
        else:
            p.add_argument(flag, dest=key, default=_UNSET, type=coerce)


def build_parser() -> _Parser:
    parser = _Parser(prog="lextag", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    lex = sub.add_parser("lexicon", help="manage a lexicon TSV")
    lex.add_argument("action", choices=("build", "add", "remove", "stats"))
    lex.add_argument("--lexicon", required=True)
    lex.add_argument("--surface")
    lex.add_argument("--category", default="")
    lex.set_defaults(func=cmd_lexicon)

    match = sub.add_parser("match", help="dump lexicon matches for a sentence")
    match.add_argument("text")
    match.add_argument("--lexicon", required=True)
    match.add_argument("--tokenizer")
    match.add_argument("--config")
    _add_settings_flags(match, ("top_n", "dict_candidate", "lowercase", "char_level", "seed"))
    match.set_defaults(func=cmd_match)

    synth = sub.add_parser("synth", help="generate the synthetic corpus")
    synth.add_argument("--out", required=True)
    synth.add_argument("--config")
    synth.add_argument("--ambiguity-rate", dest="ambiguity_rate", type=float, default=None)
    synth.add_argument("--train-size", dest="train_size", type=int, default=None)
    synth.add_argument("--dev-size", dest="dev_size", type=int, default=None)
    synth.add_argument("--test-size", dest="test_size", type=int, default=None)
    _add_settings_flags(synth, ("seed",))
    synth.set_defaults(func=cmd_synth)

    tr = sub.add_parser("train", help="train a tagger")
    tr.add_argument("--corpus", required=True)
    tr.add_argument("--dev", required=True)
    tr.add_argument("--lexicon")
    tr.add_argument("--variants")
    tr.add_argument("--dev-variants", dest="dev_variants")
    tr.add_argument("--out", required=True)
    tr.add_argument("--metrics")
    tr.add_argument("--config")
    tr.add_argument("--baseline", action="store_true")
    _add_settings_flags(tr, tuple(_CONFIG_TYPES))
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--lexicon")
    ev.add_argument("--variants")
    ev.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="tag sentences, one per line")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--lexicon")
    pr.add_argument("--input")
    pr.set_defaults(func=cmd_predict)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gc.add_argument("--hz", type=int, default=_UNSET)
    gc.add_argument("--tokens", type=int, default=_UNSET)
    gc.add_argument("--candidates", type=int, default=_UNSET)
    gc.add_argument("--config")
    _add_settings_flags(gc, ("seed",))
    gc.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, LexiconError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
