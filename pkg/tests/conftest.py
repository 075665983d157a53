"""Shared fixtures: a word-level tokenizer and the ambiguous-overlap sentence.

The overlap fixture is the canonical matching scene used across modules:
the sentence "play taylor swift 's sparks fly" against a lexicon holding a
three-word singer, a two-word song, and two single-word name entries, so
candidates overlap and conflict.
"""

import numpy as np
import pytest

from lextag.data import SPECIAL_PIECES, RawSentence, Tokenizer, align_labels
from lextag.lexicon import TagVocabulary, TrieLexicon


def make_word_tokenizer(words, lowercase=False):
    """A tokenizer whose pieces are exactly the given whole words."""
    return Tokenizer(list(SPECIAL_PIECES) + sorted(set(words)), lowercase=lowercase)


WORDS = ("play", "taylor", "swift", "'s", "sparks", "fly")
CATEGORIES = ("name", "singer", "song")
ENTRIES = (
    ("taylor swift 's", "singer"),
    ("sparks fly", "song"),
    ("taylor", "name"),
    ("swift", "name"),
)


@pytest.fixture
def overlap_scene():
    tokenizer = make_word_tokenizer(WORDS)
    tag_vocab = TagVocabulary(CATEGORIES)
    store = TrieLexicon(tokenizer, tag_vocab)
    for surface, category in ENTRIES:
        store.insert_entry(surface, category)
    raw = RawSentence(
        words=WORDS,
        labels=("O", "B-singer", "I-singer", "I-singer", "B-song", "I-song"),
        spans=((1, 4, "singer"), (4, 6, "song")),
    )
    sentence = align_labels(raw, tokenizer, tag_vocab)
    return {
        "tokenizer": tokenizer,
        "tag_vocab": tag_vocab,
        "store": store,
        "sentence": sentence,
        # candidate spans in subword coordinates (sentinel at position 0)
        "expected": [
            (2, 3, tag_vocab.category_id("name")),
            (2, 5, tag_vocab.category_id("singer")),
            (3, 4, tag_vocab.category_id("name")),
            (5, 7, tag_vocab.category_id("song")),
        ],
    }


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
