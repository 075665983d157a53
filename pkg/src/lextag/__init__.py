"""Lexicon-enhanced sequence tagging with trie matching and match denoising."""

from .data import (
    IGNORE_LABEL,
    LabeledSentence,
    RawSentence,
    Tokenizer,
    align_labels,
    bio_to_spans,
    build_tokenizer,
    decode_predictions,
    parse_conll,
    spans_to_bio,
    write_conll,
)
from .lexicon import (
    CategoryNotRegistered,
    EmptyEntryError,
    LexiconError,
    TagVocabulary,
    TrieLexicon,
    TrieSnapshot,
)
from .matching import (
    MatchSet,
    TagCandidate,
    build_match_set,
    cap_candidates,
    derive_denoise_labels,
    dump_candidates,
    fast_match,
    make_candidate,
    select_top_n,
)
from .model import ForwardOutput, LexTagModel, ModelConfig, load_checkpoint, save_checkpoint
from .synthetic import SyntheticConfig, SyntheticData, generate_synthetic, write_dataset
from .training import (
    Adam,
    EvalReport,
    TrainConfig,
    TrainExample,
    build_examples,
    evaluate,
    joint_loss,
    span_prf,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "IGNORE_LABEL",
    "LabeledSentence",
    "RawSentence",
    "Tokenizer",
    "align_labels",
    "bio_to_spans",
    "build_tokenizer",
    "decode_predictions",
    "parse_conll",
    "spans_to_bio",
    "write_conll",
    "CategoryNotRegistered",
    "EmptyEntryError",
    "LexiconError",
    "TagVocabulary",
    "TrieLexicon",
    "TrieSnapshot",
    "MatchSet",
    "TagCandidate",
    "build_match_set",
    "cap_candidates",
    "derive_denoise_labels",
    "dump_candidates",
    "fast_match",
    "make_candidate",
    "select_top_n",
    "ForwardOutput",
    "LexTagModel",
    "ModelConfig",
    "load_checkpoint",
    "save_checkpoint",
    "SyntheticConfig",
    "SyntheticData",
    "generate_synthetic",
    "write_dataset",
    "Adam",
    "EvalReport",
    "TrainConfig",
    "TrainExample",
    "build_examples",
    "evaluate",
    "joint_loss",
    "span_prf",
    "train",
]
