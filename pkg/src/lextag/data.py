"""Corpus ingestion, subword tokenization, and BIO label alignment."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .lexicon import TagVocabulary

logger = logging.getLogger(__name__)

PAD_PIECE = "<pad>"
UNK_PIECE = "<unk>"
BOS_PIECE = "<s>"
EOS_PIECE = "</s>"
SPECIAL_PIECES = (PAD_PIECE, UNK_PIECE, BOS_PIECE, EOS_PIECE)

CONTINUATION = "##"

# Loss positions carrying this id are excluded from the tagger objective.
IGNORE_LABEL = -1

_MAX_PIECE_CHARS = 12


@dataclass(frozen=True)
class RawSentence:
    """A parsed corpus sentence before tokenization."""

    words: tuple[str, ...]
    labels: tuple[str, ...]  # word-level BIO strings
    spans: tuple[tuple[int, int, str], ...]  # (start, end) word indices, end exclusive


@dataclass(frozen=True)
class LabeledSentence:
    """A tokenized sentence with aligned gold annotations.

    ``subword_ids`` includes the summary sentinel at position 0 and the end
    sentinel at the last position.  ``gold_tags`` is the training target
    (first subword of each word labeled, continuations and sentinels masked
    with IGNORE_LABEL); ``match_tags`` propagates I- tags through whole
    spans so match candidates can be compared span-for-span.
    """

    words: tuple[str, ...]
    subword_ids: tuple[int, ...]
    word_to_subword: tuple[int, ...]
    gold_tags: tuple[int, ...]
    match_tags: tuple[int, ...]
    gold_spans: tuple[tuple[int, int, int], ...]  # (start, end, category_id) over words


class Tokenizer:
    """Greedy longest-match subword segmenter over a fixed piece vocabulary.

    Pieces that continue a word carry the ``##`` marker.  Characters absent
    from the vocabulary fall back to the unknown piece, so every input
    segments fully and deterministically.
    """

    def __init__(self, pieces: Sequence[str], lowercase: bool = False, char_level: bool = False):
        if list(pieces[: len(SPECIAL_PIECES)]) != list(SPECIAL_PIECES):
            raise ValueError(f"vocabulary must start with the special pieces {SPECIAL_PIECES}")
        self.pieces = list(pieces)
        self.piece_ids = {p: i for i, p in enumerate(self.pieces)}
        if len(self.piece_ids) != len(self.pieces):
            raise ValueError("duplicate piece in vocabulary")
        self.lowercase = lowercase
        self.char_level = char_level
        self.pad_id = self.piece_ids[PAD_PIECE]
        self.unk_id = self.piece_ids[UNK_PIECE]
        self.bos_id = self.piece_ids[BOS_PIECE]
        self.eos_id = self.piece_ids[EOS_PIECE]
        self._max_len = max((len(p) for p in self.pieces), default=1)

    @property
    def vocab_size(self) -> int:
        return len(self.pieces)

    def segment_word(self, word: str) -> list[str]:
        """Split one word into pieces (greedy longest match, left to right)."""
        if self.lowercase:
            word = word.lower()
        if self.char_level:
            return [ch if i == 0 else CONTINUATION + ch for i, ch in enumerate(word)]
        out: list[str] = []
        start = 0
        n = len(word)
        while start < n:
            prefix = CONTINUATION if start > 0 else ""
            end = min(n, start + self._max_len - len(prefix))
            piece = None
            while end > start:
                cand = prefix + word[start:end]
                if cand in self.piece_ids:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                out.append(UNK_PIECE)
                start += 1
            else:
                out.append(piece)
                start = end
        return out

    def encode_word(self, word: str) -> list[int]:
        return [self.piece_ids.get(p, self.unk_id) for p in self.segment_word(word)]

    def encode_words(self, words: Sequence[str]) -> tuple[list[int], list[int]]:
        """Encode a word sequence; returns (piece ids, first-piece index per word)."""
        ids: list[int] = []
        first: list[int] = []
        for w in words:
            first.append(len(ids))
            ids.extend(self.encode_word(w))
        return ids, first

    def encode_text(self, text: str) -> list[int]:
        """Encode whitespace-separated text (no sentinels), e.g. a lexicon surface."""
        ids, _ = self.encode_words(text.split())
        return ids

    def decode_pieces(self, ids: Iterable[int]) -> str:
        """Rebuild text from piece ids: ``##`` continues a word, otherwise a space."""
        words: list[str] = []
        for i in ids:
            p = self.pieces[i]
            if p.startswith(CONTINUATION) and words:
                words[-1] += p[len(CONTINUATION):]
            else:
                words.append(p)
        return " ".join(words)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for p in self.pieces:
                f.write(p + "\n")

    @classmethod
    def load(cls, path, lowercase: bool = False, char_level: bool = False) -> "Tokenizer":
        with open(path, "r", encoding="utf-8") as f:
            pieces = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(pieces, lowercase=lowercase, char_level=char_level)


def build_tokenizer(
    corpus_words: Iterable[Sequence[str]],
    vocab_size: int = 2000,
    lowercase: bool = False,
    char_level: bool = False,
) -> Tokenizer:
    """Build a tokenizer from corpus word frequencies.

    Every observed character (word-initial and continuation form) is always
    included so segmentation never fails; the remaining budget goes to the
    most frequent multi-character substrings.
    """
    word_counts: Counter[str] = Counter()
    for words in corpus_words:
        for w in words:
            word_counts[w.lower() if lowercase else w] += 1

    chars: set[str] = set()
    sub_counts: Counter[str] = Counter()
    for word, count in word_counts.items():
        for ch in word:
            chars.add(ch)
            chars.add(CONTINUATION + ch)
        n = len(word)
        for i in range(n):
            prefix = "" if i == 0 else CONTINUATION
            for j in range(i + 2, min(n, i + _MAX_PIECE_CHARS) + 1):
                sub_counts[prefix + word[i:j]] += count

    base = list(SPECIAL_PIECES) + sorted(chars)
    if vocab_size < len(base):
        raise ValueError(
            f"vocab_size {vocab_size} is below the character inventory size {len(base)}"
        )
    budget = vocab_size - len(base)
    picked = [p for p, _ in sorted(sub_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:budget]]
    return Tokenizer(base + picked, lowercase=lowercase, char_level=char_level)


def parse_conll(path) -> list[RawSentence]:
    """Parse a CoNLL-style file: ``token<WS>BIO-label`` lines, blank-line separated.

    I- tags without a matching open span are repaired as B- (a warning with
    the total repair count is logged).  Any non-BIO label raises with the
    offending line number.
    """
    sentences: list[RawSentence] = []
    words: list[str] = []
    labels: list[str] = []
    repairs = 0

    def flush():
        nonlocal repairs
        if not words:
            return
        spans, fixed = bio_to_spans(labels)
        repairs += fixed
        sentences.append(RawSentence(tuple(words), tuple(labels), tuple(spans)))
        words.clear()
        labels.clear()

    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'token label', got {line!r}")
            token, label = parts
            if label != "O" and not (
                label.startswith(("B-", "I-")) or label in ("B", "I")
            ):
                raise ValueError(f"{path}:{lineno}: not a BIO label: {label!r}")
            words.append(token)
            labels.append(label)
    flush()
    if repairs:
        logger.warning("repaired %d dangling I- tags while parsing %s", repairs, path)
    return sentences


def write_conll(path, sentences: Iterable[RawSentence]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sent in sentences:
            for word, label in zip(sent.words, sent.labels):
                f.write(f"{word}\t{label}\n")
            f.write("\n")


def bio_to_spans(labels: Sequence[str]) -> tuple[list[tuple[int, int, str]], int]:
    """Decode BIO labels to (start, end, category) spans; returns (spans, repairs).

    A dangling I- (after O or a different category) opens a new span, which
    counts as one repair.  Categoryless B/I decode with category "".
    """
    spans: list[tuple[int, int, str]] = []
    start: Optional[int] = None
    cat: Optional[str] = None
    repairs = 0

    def close(end: int):
        nonlocal start, cat
        if start is not None:
            spans.append((start, end, cat or ""))
        start, cat = None, None

    for i, label in enumerate(labels):
        if label == "O":
            close(i)
            continue
        prefix, _, category = label.partition("-")
        if prefix == "B":
            close(i)
            start, cat = i, category
        else:  # "I"
            if start is None or cat != category:
                repairs += 1
                close(i)
                start, cat = i, category
    close(len(labels))
    return spans, repairs


def spans_to_bio(length: int, spans: Iterable[tuple[int, int, str]]) -> list[str]:
    labels = ["O"] * length
    for start, end, cat in spans:
        suffix = f"-{cat}" if cat else ""
        labels[start] = "B" + suffix
        for k in range(start + 1, end):
            labels[k] = "I" + suffix
    return labels


def align_labels(
    raw: RawSentence, tokenizer: Tokenizer, tag_vocab: TagVocabulary
) -> LabeledSentence:
    """Tokenize a sentence and align its gold spans to subword positions.

    The first subword of each word carries the word's tag in ``gold_tags``;
    continuation subwords and sentinels are loss-masked.  ``match_tags``
    instead marks every subword inside a span (B then I) so candidate
    matches can be compared exactly.
    """
    piece_ids, first = tokenizer.encode_words(raw.words)
    subword_ids = (tokenizer.bos_id, *piece_ids, tokenizer.eos_id)
    word_to_subword = tuple(i + 1 for i in first)
    l = len(subword_ids)

    gold = [IGNORE_LABEL] * l
    match = [tag_vocab.o_id] * l
    for wi in range(len(raw.words)):
        gold[word_to_subword[wi]] = tag_vocab.encode_label(raw.labels[wi])

    spans_sub: list[tuple[int, int, int]] = []
    for ws, we, cat in raw.spans:
        cid = tag_vocab.category_id(cat)
        spans_sub.append((ws, we, cid))
        sub_start = word_to_subword[ws]
        sub_end = word_to_subword[we] if we < len(raw.words) else l - 1
        match[sub_start] = tag_vocab.b_id(cid)
        for k in range(sub_start + 1, sub_end):
            match[k] = tag_vocab.i_id(cid)

    return LabeledSentence(
        words=raw.words,
        subword_ids=subword_ids,
        word_to_subword=word_to_subword,
        gold_tags=tuple(gold),
        match_tags=tuple(match),
        gold_spans=tuple(spans_sub),
    )


def decode_predictions(
    sentence: LabeledSentence,
    subword_tag_ids: Sequence[int],
    tag_vocab: TagVocabulary,
) -> list[tuple[int, int, int]]:
    """Turn per-subword tag predictions into word-level spans.

    Applies the use-first rule: each word's tag is read off its first
    subword, then the word-level BIO sequence is decoded (with repair).
    """
    word_labels = []
    for pos in sentence.word_to_subword:
        name = tag_vocab.tag_name(int(subword_tag_ids[pos]))
        if name != "O" and name.partition("-")[0] not in ("B", "I"):
            name = "O"
        word_labels.append(name)
    spans, _ = bio_to_spans(word_labels)
    return [(s, e, tag_vocab.category_id(c)) for s, e, c in spans]
