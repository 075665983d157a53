"""Candidate tag sequences from lexicon matches, ranking, and denoise labels.

Everything here is a pure function over an immutable trie snapshot, so the
whole pipeline is safe to run from any number of threads at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .lexicon import TagVocabulary, TrieSnapshot


@dataclass(frozen=True)
class TagCandidate:
    """One matched span rendered as a sentence-length tag sequence.

    B-category at ``start``, I-category strictly inside, O everywhere else.
    Sentinel positions (the summary slot at 0 and the end slot) are always O
    because spans never touch them.
    """

    tags: tuple[int, ...]
    start: int
    end: int  # exclusive
    category: int

    @property
    def match_len(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class MatchSet:
    """The capped candidate list for one sentence, plus optional supervision."""

    candidates: tuple[TagCandidate, ...]
    denoise_labels: Optional[tuple[bool, ...]] = None

    def __post_init__(self):
        if self.denoise_labels is not None and len(self.denoise_labels) != len(self.candidates):
            raise ValueError(
                f"{len(self.denoise_labels)} labels for {len(self.candidates)} candidates"
            )

    def __len__(self) -> int:
        return len(self.candidates)


_EMPTY = MatchSet(candidates=())


def empty_match_set() -> MatchSet:
    return _EMPTY


def make_candidate(
    length: int, start: int, end: int, cid: int, tag_vocab: TagVocabulary
) -> TagCandidate:
    tags = [tag_vocab.o_id] * length
    tags[start] = tag_vocab.b_id(cid)
    i_id = tag_vocab.i_id(cid)
    for k in range(start + 1, end):
        tags[k] = i_id
    return TagCandidate(tags=tuple(tags), start=start, end=end, category=cid)


def fast_match(
    snapshot: TrieSnapshot, tokens: Sequence[int], tag_vocab: TagVocabulary
) -> list[TagCandidate]:
    """Every lexicon hit in ``tokens``, one candidate per (span, category).

    ``tokens`` is the full encoder input including both sentinels, so match
    starts run over positions 1 .. len-2 and ends stay below the end slot.
    Output order is (start, end, category) ascending with no duplicates.
    """
    if not tokens:
        raise ValueError("tokens must be non-empty")
    n = len(tokens)
    out: list[TagCandidate] = []
    for start in range(1, n - 1):
        for end, cid in snapshot.match_at(tokens, start):
            if end <= n - 1:
                out.append(make_candidate(n, start, end, cid, tag_vocab))
    return out


def _global_order(candidates: list[TagCandidate]) -> list[TagCandidate]:
    return sorted(candidates, key=lambda c: (c.start, c.end, c.category))


def select_top_n(candidates: Sequence[TagCandidate], n: int) -> list[TagCandidate]:
    """Keep at most ``n`` candidates per start, longest matches first.

    Ties prefer the smaller category id, then the smaller end; the output is
    re-sorted to the global (start, end, category) order.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    by_start: dict[int, list[TagCandidate]] = {}
    for c in candidates:
        by_start.setdefault(c.start, []).append(c)
    kept: list[TagCandidate] = []
    for group in by_start.values():
        group.sort(key=lambda c: (-c.match_len, c.category, c.end))
        kept.extend(group[:n])
    return _global_order(kept)


def cap_candidates(candidates: Sequence[TagCandidate], dict_candidate: int) -> MatchSet:
    """Truncate to the ``dict_candidate`` longest candidates overall.

    Uses the same tie-break as per-start selection (category, then end, then
    start) and restores the global order afterwards.
    """
    if dict_candidate < 1:
        raise ValueError(f"dict_candidate must be >= 1, got {dict_candidate}")
    kept = list(candidates)
    if len(kept) > dict_candidate:
        kept.sort(key=lambda c: (-c.match_len, c.category, c.end, c.start))
        kept = kept[:dict_candidate]
    return MatchSet(candidates=tuple(_global_order(kept)))


def derive_denoise_labels(
    candidates: Sequence[TagCandidate],
    gold_tags: Sequence[int],
    tag_vocab: TagVocabulary,
) -> tuple[bool, ...]:
    """True for candidates whose span and category agree exactly with gold.

    ``gold_tags`` must be the span-propagated variant (B at the span start,
    I through every following in-span position).  A candidate is positive
    iff gold carries its B at start, its I through end-1, and does not
    continue the same I at end.
    """
    labels: list[bool] = []
    for c in candidates:
        if len(c.tags) != len(gold_tags):
            raise ValueError(
                f"candidate length {len(c.tags)} does not match gold length {len(gold_tags)}"
            )
        b, i = tag_vocab.b_id(c.category), tag_vocab.i_id(c.category)
        ok = gold_tags[c.start] == b
        ok = ok and all(gold_tags[k] == i for k in range(c.start + 1, c.end))
        ok = ok and (c.end >= len(gold_tags) or gold_tags[c.end] != i)
        labels.append(ok)
    return tuple(labels)


def build_match_set(
    snapshot: TrieSnapshot,
    tokens: Sequence[int],
    tag_vocab: TagVocabulary,
    top_n: Optional[int] = 1,
    dict_candidate: int = 16,
    gold_tags: Optional[Sequence[int]] = None,
) -> MatchSet:
    """Run the full pipeline: match, rank per start, cap, optionally label.

    ``top_n=None`` skips per-start selection (every hit survives to the cap).
    """
    candidates = fast_match(snapshot, tokens, tag_vocab)
    if top_n is not None:
        candidates = select_top_n(candidates, top_n)
    match_set = cap_candidates(candidates, dict_candidate)
    if gold_tags is not None:
        labels = derive_denoise_labels(match_set.candidates, gold_tags, tag_vocab)
        match_set = MatchSet(candidates=match_set.candidates, denoise_labels=labels)
    return match_set


def dump_candidates(match_set: MatchSet, tag_vocab: TagVocabulary) -> list[str]:
    """Render candidates one per line: ``start:end<TAB>category[<TAB>label]``."""
    lines = []
    for idx, c in enumerate(match_set.candidates):
        line = f"{c.start}:{c.end}\t{tag_vocab.category_name(c.category)}"
        if match_set.denoise_labels is not None:
            line += f"\t{int(match_set.denoise_labels[idx])}"
        lines.append(line)
    return lines
