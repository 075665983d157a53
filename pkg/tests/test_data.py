"""Corpus parsing, subword tokenization, and label alignment."""

import logging

import pytest

from lextag.data import (
    CONTINUATION,
    IGNORE_LABEL,
    SPECIAL_PIECES,
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
from lextag.lexicon import TagVocabulary

from conftest import make_word_tokenizer


class TestBioSpans:
    def test_simple_two_spans(self):
        labels = ["B-org", "I-org", "O", "B-per", "O"]
        spans, repairs = bio_to_spans(labels)
        assert spans == [(0, 2, "org"), (3, 4, "per")]
        assert repairs == 0

    def test_adjacent_b_starts_new_span(self):
        spans, repairs = bio_to_spans(["B-loc", "B-loc", "I-loc"])
        assert spans == [(0, 1, "loc"), (1, 3, "loc")]
        assert repairs == 0

    def test_dangling_i_repaired(self):
        spans, repairs = bio_to_spans(["O", "I-org", "I-org"])
        assert spans == [(1, 3, "org")]
        assert repairs == 1

    def test_category_switch_mid_span_repaired(self):
        spans, repairs = bio_to_spans(["B-org", "I-per"])
        assert spans == [(0, 1, "org"), (1, 2, "per")]
        assert repairs == 1

    def test_categoryless_bio(self):
        spans, repairs = bio_to_spans(["B", "I", "O"])
        assert spans == [(0, 2, "")]
        assert repairs == 0

    def test_span_reaching_sentence_end(self):
        spans, _ = bio_to_spans(["O", "B-x", "I-x"])
        assert spans == [(1, 3, "x")]

    def test_round_trip_random(self, rng):
        cats = ["org", "per", "loc"]
        for _ in range(50):
            length = int(rng.integers(1, 15))
            spans = []
            pos = 0
            while pos < length:
                if rng.random() < 0.4:
                    end = min(length, pos + int(rng.integers(1, 4)))
                    spans.append((pos, end, cats[rng.integers(0, 3)]))
                    pos = end
                else:
                    pos += 1
            labels = spans_to_bio(length, spans)
            decoded, repairs = bio_to_spans(labels)
            assert decoded == spans
            assert repairs == 0


class TestParseConll:
    def write(self, tmp_path, text):
        path = tmp_path / "corpus.conll"
        path.write_text(text, encoding="utf-8")
        return path

    def test_basic_sentence(self, tmp_path):
        path = self.write(tmp_path, "World\tB-org\nBank\tI-org\ngrew\tO\n\n")
        sents = parse_conll(path)
        assert len(sents) == 1
        assert sents[0].words == ("World", "Bank", "grew")
        assert sents[0].labels == ("B-org", "I-org", "O")
        assert sents[0].spans == ((0, 2, "org"),)

    def test_blank_file_and_extra_separators(self, tmp_path):
        assert parse_conll(self.write(tmp_path, "\n\n\n")) == []
        sents = parse_conll(self.write(tmp_path, "a\tO\n\n\n\nb\tO\n"))
        assert [s.words for s in sents] == [("a",), ("b",)]

    def test_space_separated_columns(self, tmp_path):
        sents = parse_conll(self.write(tmp_path, "a O\nb B-x\n"))
        assert sents[0].labels == ("O", "B-x")

    def test_dangling_i_repaired_and_logged(self, tmp_path, caplog):
        path = self.write(tmp_path, "a\tO\nb\tI-org\n\n")
        with caplog.at_level(logging.WARNING, logger="lextag.data"):
            sents = parse_conll(path)
        assert sents[0].spans == ((1, 2, "org"),)
        assert any("repaired 1" in r.getMessage() for r in caplog.records)

    def test_non_bio_label_raises_with_line_number(self, tmp_path):
        path = self.write(tmp_path, "a\tO\nb\tX-org\n")
        with pytest.raises(ValueError, match=r":2:"):
            parse_conll(path)

    def test_malformed_line_raises(self, tmp_path):
        path = self.write(tmp_path, "only-one-column\n")
        with pytest.raises(ValueError, match=r":1:"):
            parse_conll(path)

    def test_write_parse_round_trip(self, tmp_path):
        sents = [
            RawSentence(("play", "sparks", "fly"), ("O", "B-song", "I-song"), ((1, 3, "song"),)),
            RawSentence(("hello",), ("O",), ()),
        ]
        path = tmp_path / "out.conll"
        write_conll(path, sents)
        assert parse_conll(path) == sents


class TestTokenizer:
    def test_vocabulary_must_start_with_specials(self):
        with pytest.raises(ValueError, match="special pieces"):
            Tokenizer(["a", "b"])

    def test_duplicate_piece_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Tokenizer(list(SPECIAL_PIECES) + ["a", "a"])

    def test_greedy_longest_match(self):
        tok = Tokenizer(list(SPECIAL_PIECES) + ["p", "play", "pl", "##ay", "##a", "##y"])
        assert tok.segment_word("play") == ["play"]
        assert tok.segment_word("playy") == ["play", "##y"]

    def test_continuation_restart_after_unknown(self):
        tok = Tokenizer(list(SPECIAL_PIECES) + ["a", "##a"])
        # 'x' is unknown: one UNK piece, then 'a' continues the word
        assert tok.segment_word("xa") == ["<unk>", "##a"]

    def test_encode_words_first_indices(self):
        tok = make_word_tokenizer(["ab", "##c"])
        ids, first = tok.encode_words(["abc", "ab"])
        assert first == [0, 2]
        assert len(ids) == 3

    def test_decode_inverts_encode_for_known_text(self):
        tok = make_word_tokenizer(["play", "##ing", "songs"])
        text = "playing songs"
        assert tok.decode_pieces(tok.encode_text(text)) == text

    def test_deterministic(self):
        tok = make_word_tokenizer(["ta", "##y", "##lor", "t", "##a"])
        assert tok.encode_word("taylor") == tok.encode_word("taylor")

    def test_lowercase_folding(self):
        tok = Tokenizer(list(SPECIAL_PIECES) + ["swift"], lowercase=True)
        assert tok.segment_word("SwIfT") == ["swift"]

    def test_char_level_mode(self):
        tok = Tokenizer(list(SPECIAL_PIECES) + ["a", "b", "##a", "##b"], char_level=True)
        assert tok.segment_word("aba") == ["a", "##b", "##a"]

    def test_save_load_round_trip(self, tmp_path):
        tok = make_word_tokenizer(["play", "##er", "zone"])
        path = tmp_path / "pieces.txt"
        tok.save(path)
        again = Tokenizer.load(path)
        assert again.pieces == tok.pieces
        assert again.encode_word("player") == tok.encode_word("player")


class TestBuildTokenizer:
    def test_every_character_always_segmentable(self, rng):
        corpus = [["alpha", "beta"], ["gamma", "beta"]]
        tok = build_tokenizer(corpus, vocab_size=200)
        for word in ("alpha", "beta", "gamma", "gab", "tamm"):
            pieces = tok.segment_word(word)
            assert "<unk>" not in pieces
            assert tok.decode_pieces(tok.encode_word(word)) == word

    def test_frequent_substrings_become_pieces(self):
        corpus = [["thethe"] * 50, ["other"]]
        tok = build_tokenizer(corpus, vocab_size=60)
        assert any(len(p.lstrip("#")) > 1 for p in tok.pieces[len(SPECIAL_PIECES):])

    def test_vocab_size_below_chars_rejected(self):
        with pytest.raises(ValueError, match="character inventory"):
            build_tokenizer([["abcdefgh"]], vocab_size=8)

    def test_piece_budget_respected(self):
        tok = build_tokenizer([["aaa", "aab", "abb"]], vocab_size=12)
        assert tok.vocab_size <= 12


class TestAlignLabels:
    def setup_method(self):
        self.vocab = TagVocabulary(categories=("song", "name"))

    def test_single_piece_words_identity_mapping(self):
        tok = make_word_tokenizer(["play", "sparks", "fly"])
        raw = RawSentence(
            ("play", "sparks", "fly"),
            ("O", "B-song", "I-song"),
            ((1, 3, "song"),),
        )
        sent = align_labels(raw, tok, self.vocab)
        assert sent.word_to_subword == (1, 2, 3)
        assert sent.subword_ids[0] == tok.bos_id
        assert sent.subword_ids[-1] == tok.eos_id
        b, i = self.vocab.b_id(0), self.vocab.i_id(0)
        assert sent.gold_tags == (IGNORE_LABEL, 0, b, i, IGNORE_LABEL)
        assert sent.match_tags == (0, 0, b, i, 0)
        assert sent.gold_spans == ((1, 3, 0),)

    def test_continuation_subwords_are_masked(self):
        tok = make_word_tokenizer(["tay", "##lor", "sings"])
        raw = RawSentence(("taylor", "sings"), ("B-name", "O"), ((0, 1, "name"),))
        sent = align_labels(raw, tok, self.vocab)
        assert sent.word_to_subword == (1, 3)
        b_name = self.vocab.b_id(1)
        assert sent.gold_tags == (IGNORE_LABEL, b_name, IGNORE_LABEL, 0, IGNORE_LABEL)

    def test_match_tags_fill_span_interior_subwords(self):
        tok = make_word_tokenizer(["tay", "##lor", "swift", "sings"])
        raw = RawSentence(("taylor", "swift", "sings"), ("B-name", "I-name", "O"), ((0, 2, "name"),))
        sent = align_labels(raw, tok, self.vocab)
        b, i = self.vocab.b_id(1), self.vocab.i_id(1)
        # word 0 covers subwords 1-2, word 1 covers subword 3, word 2 subword 4
        assert sent.match_tags == (0, b, i, i, 0, 0)
        assert sent.gold_tags == (IGNORE_LABEL, b, IGNORE_LABEL, i, 0, IGNORE_LABEL)

    def test_span_ending_at_sentence_end(self):
        tok = make_word_tokenizer(["play", "spar", "##ks"])
        raw = RawSentence(("play", "sparks"), ("O", "B-song"), ((1, 2, "song"),))
        sent = align_labels(raw, tok, self.vocab)
        b, i = self.vocab.b_id(0), self.vocab.i_id(0)
        # the span's last word runs to the end sentinel exclusive
        assert sent.match_tags == (0, 0, b, i, 0)

    def test_unknown_category_raises(self):
        tok = make_word_tokenizer(["x"])
        raw = RawSentence(("x",), ("B-mystery",), ((0, 1, "mystery"),))
        with pytest.raises(Exception, match="mystery"):
            align_labels(raw, tok, self.vocab)


class TestDecodePredictions:
    def setup_method(self):
        self.vocab = TagVocabulary(categories=("song", "name"))
        self.tok = make_word_tokenizer(["tay", "##lor", "swift", "sings"])
        self.raw = RawSentence(
            ("taylor", "swift", "sings"), ("B-name", "I-name", "O"), ((0, 2, "name"),)
        )
        self.sent = align_labels(self.raw, self.tok, self.vocab)

    def test_reads_first_subword_only(self):
        l = len(self.sent.subword_ids)
        preds = [self.vocab.o_id] * l
        b, i = self.vocab.b_id(1), self.vocab.i_id(1)
        preds[1], preds[3] = b, i
        preds[2] = self.vocab.b_id(0)  # continuation subword: must be ignored
        assert decode_predictions(self.sent, preds, self.vocab) == [(0, 2, 1)]

    def test_pad_prediction_maps_to_outside(self):
        l = len(self.sent.subword_ids)
        preds = [self.vocab.pad_id] * l
        assert decode_predictions(self.sent, preds, self.vocab) == []

    def test_gold_round_trip(self):
        preds = [t if t != IGNORE_LABEL else self.vocab.o_id for t in self.sent.gold_tags]
        assert decode_predictions(self.sent, preds, self.vocab) == list(self.sent.gold_spans)
