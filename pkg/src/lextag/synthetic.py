"""Ambiguity-controlled synthetic corpus for desk-scale experiments.

Entity surfaces are built from a word pool disjoint from filler words, so
span boundaries are learnable from context alone.  A configurable fraction
of surfaces is ambiguous: registered under one category in lexicon variant
0 and another in variant 1, with each example's gold label decided by its
designated variant.  A context-only model therefore cannot beat chance on
ambiguous types, while a lexicon-aware one can.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import RawSentence, spans_to_bio, write_conll

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass
class SyntheticConfig:
    categories: tuple[str, ...] = ("org", "per", "loc", "misc")
    filler_vocab: int = 60
    entity_word_vocab: int = 30
    entity_count: int = 40
    ambiguity_rate: float = 0.5
    noise_entries: int = 10
    min_sentence_words: int = 6
    max_sentence_words: int = 12
    max_entities_per_sentence: int = 2
    train_size: int = 2000
    dev_size: int = 300
    test_size: int = 500

    def __post_init__(self):
        if not 0.0 <= self.ambiguity_rate <= 1.0:
            raise ValueError("ambiguity_rate must lie in [0, 1]")
        if self.ambiguity_rate > 0 and len(self.categories) < 2:
            raise ValueError("ambiguous surfaces require at least 2 categories")
        if not self.categories:
            raise ValueError("at least one category required")
        if self.entity_count < 1 or self.filler_vocab < 1 or self.entity_word_vocab < 1:
            raise ValueError("vocabulary sizes must be positive")
        if self.min_sentence_words < 1 or self.max_sentence_words < self.min_sentence_words:
            raise ValueError("bad sentence length bounds")
        if self.max_entities_per_sentence < 1:
            raise ValueError("max_entities_per_sentence must be >= 1")


@dataclass
class SyntheticData:
    train: list[RawSentence]
    dev: list[RawSentence]
    test: list[RawSentence]
    train_variants: list[int]
    dev_variants: list[int]
    test_variants: list[int]
    lexicon_variants: list[list[tuple[str, str]]]  # rows of (surface, category)
    categories: tuple[str, ...]
    filler_words: list[str] = field(default_factory=list)
    entity_words: list[str] = field(default_factory=list)
    surfaces: list[tuple[str, ...]] = field(default_factory=list)


def _word_pool(rng: np.random.Generator, count: int) -> list[str]:
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    pairs = [a + b for a in syllables for b in syllables]
    if count > len(pairs):
        raise ValueError(f"cannot draw {count} distinct words")
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order[:count]]


def generate_synthetic(seed: int, config: Optional[SyntheticConfig] = None) -> SyntheticData:
    """Build train/dev/test corpora plus one lexicon TSV per variant.

    Deterministic under the seed.  Every gold span's surface appears in the
    example's designated lexicon variant under the gold category.
    """
    config = config or SyntheticConfig()
    rng = np.random.default_rng(seed)
    cats = config.categories

    pool = _word_pool(rng, config.filler_vocab + config.entity_word_vocab)
    filler = pool[: config.filler_vocab]
    entity_words = pool[config.filler_vocab :]

    surfaces: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    while len(surfaces) < config.entity_count:
        length = int(rng.choice([1, 2, 3], p=[0.35, 0.45, 0.2]))
        surface = tuple(entity_words[i] for i in rng.integers(0, len(entity_words), length))
        if surface not in seen:
            seen.add(surface)
            surfaces.append(surface)

    ambiguous_count = round(config.ambiguity_rate * config.entity_count)
    category_by_variant: list[tuple[str, str]] = []
    for i in range(config.entity_count):
        if i < ambiguous_count:
            a, b = rng.choice(len(cats), size=2, replace=False)
            category_by_variant.append((cats[a], cats[b]))
        else:
            c = cats[int(rng.integers(len(cats)))]
            category_by_variant.append((c, c))

    noise: list[tuple[tuple[str, ...], str]] = []
    noise_seen: set[tuple[str, ...]] = set()
    while len(noise) < config.noise_entries:
        length = int(rng.integers(1, 3))
        surface = tuple(filler[i] for i in rng.integers(0, len(filler), length))
        if surface not in noise_seen:
            noise_seen.add(surface)
            noise.append((surface, cats[int(rng.integers(len(cats)))]))

    lexicon_variants: list[list[tuple[str, str]]] = []
    for v in range(2):
        rows = [(" ".join(s), category_by_variant[i][v]) for i, s in enumerate(surfaces)]
        rows.extend((" ".join(s), c) for s, c in noise)
        lexicon_variants.append(sorted(set(rows)))

    def sample_sentence() -> tuple[RawSentence, int]:
        variant = int(rng.integers(2))
        n_fill = int(rng.integers(config.min_sentence_words, config.max_sentence_words + 1))
        words = [filler[i] for i in rng.integers(0, len(filler), n_fill)]
        k = int(rng.integers(1, config.max_entities_per_sentence + 1))
        slots = sorted(rng.choice(n_fill + 1, size=min(k, n_fill + 1), replace=False))
        spans: list[tuple[int, int, str]] = []
        offset = 0
        for slot in slots:
            idx = int(rng.integers(len(surfaces)))
            surface = surfaces[idx]
            category = category_by_variant[idx][variant]
            start = slot + offset
            words[start:start] = list(surface)
            spans.append((start, start + len(surface), category))
            offset += len(surface)
        labels = spans_to_bio(len(words), spans)
        return RawSentence(tuple(words), tuple(labels), tuple(spans)), variant

    def sample_split(size: int) -> tuple[list[RawSentence], list[int]]:
        sents, variants = [], []
        for _ in range(size):
            s, v = sample_sentence()
            sents.append(s)
            variants.append(v)
        return sents, variants

    train, train_v = sample_split(config.train_size)
    dev, dev_v = sample_split(config.dev_size)
    test, test_v = sample_split(config.test_size)
    return SyntheticData(
        train=train,
        dev=dev,
        test=test,
        train_variants=train_v,
        dev_variants=dev_v,
        test_variants=test_v,
        lexicon_variants=lexicon_variants,
        categories=cats,
        filler_words=filler,
        entity_words=entity_words,
        surfaces=surfaces,
    )


def write_dataset(data: SyntheticData, outdir) -> dict[str, str]:
    """Write corpora, variant-id files, and lexicon TSVs; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths: dict[str, str] = {}
    for split in ("train", "dev", "test"):
        corpus_path = os.path.join(outdir, f"{split}.conll")
        write_conll(corpus_path, getattr(data, split))
        paths[split] = corpus_path
        variants_path = os.path.join(outdir, f"{split}.variants")
        with open(variants_path, "w", encoding="utf-8") as f:
            for v in getattr(data, f"{split}_variants"):
                f.write(f"{v}\n")
        paths[f"{split}_variants"] = variants_path
    for v, rows in enumerate(data.lexicon_variants):
        lex_path = os.path.join(outdir, f"lexicon.{v}.tsv")
        with open(lex_path, "w", encoding="utf-8", newline="\n") as f:
            for surface, category in rows:
                f.write(f"{surface}\t{category}\n")
        paths[f"lexicon_{v}"] = lex_path
    return paths
