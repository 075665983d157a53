"""The command-line surface: exit codes, output contracts, settings precedence."""

import numpy as np
import pytest

import lextag.tensor as T
from lextag.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VERIFY,
    GRADCHECK_TOLERANCE,
    load_config_file,
    main,
    run_gradcheck,
)

LEXICON_ROWS = sorted(
    [
        ("taylor swift", "singer"),
        ("taylor", "name"),
        ("swift", "name"),
        ("sparks fly", "song"),
        ("love story", "song"),
        ("red", "song"),
        ("red", "misc"),
        ("ed sheeran", "singer"),
    ]
)

CORPUS = """\
play\tO
taylor\tB-singer
swift\tI-singer
sparks\tB-song
fly\tI-song
now\tO

play\tO
red\tB-song
by\tO
taylor\tB-singer
swift\tI-singer

ed\tB-singer
sheeran\tI-singer
sang\tO
love\tB-song
story\tI-song

now\tO
play\tO
red\tB-misc
fly\tO
"""


@pytest.fixture
def lexicon_tsv(tmp_path):
    path = tmp_path / "lexicon.tsv"
    path.write_text("".join(f"{s}\t{c}\n" for s, c in LEXICON_ROWS), encoding="utf-8")
    return path


@pytest.fixture
def corpus_path(tmp_path):
    path = tmp_path / "tiny.conll"
    path.write_text(CORPUS, encoding="utf-8")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_missing_required_flag_is_usage(self, capsys):
        code, _, err = run(capsys, "lexicon", "build")
        assert code == EXIT_USAGE
        assert "usage error" in err

    def test_unknown_subcommand_is_usage(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == EXIT_USAGE

    def test_missing_file_is_data_error(self, capsys):
        code, _, err = run(capsys, "lexicon", "build", "--lexicon", "/no/such/file.tsv")
        assert code == EXIT_DATA
        assert "error" in err


class TestLexiconCommand:
    def test_build_reports_entry_count(self, capsys, lexicon_tsv):
        code, out, _ = run(capsys, "lexicon", "build", "--lexicon", lexicon_tsv)
        assert code == EXIT_OK
        assert out.splitlines() == [f"entries\t{len(LEXICON_ROWS)}"]

    def test_stats_histogram_matches_file(self, capsys, lexicon_tsv):
        code, out, _ = run(capsys, "lexicon", "stats", "--lexicon", lexicon_tsv)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert f"entries\t{len(LEXICON_ROWS)}" in lines
        counts = {}
        for _, cat in LEXICON_ROWS:
            counts[cat] = counts.get(cat, 0) + 1
        for cat, n in counts.items():
            assert f"category\t{cat}\t{n}" in lines
        assert any(line.startswith("max_pieces\t") for line in lines)

    def test_add_then_remove_restores_file(self, capsys, lexicon_tsv):
        original = lexicon_tsv.read_bytes()
        code, out, _ = run(
            capsys, "lexicon", "add", "--lexicon", lexicon_tsv,
            "--surface", "folklore", "--category", "misc",
        )
        assert code == EXIT_OK
        assert f"entries\t{len(LEXICON_ROWS) + 1}" in out
        code, out, _ = run(
            capsys, "lexicon", "remove", "--lexicon", lexicon_tsv,
            "--surface", "folklore", "--category", "misc",
        )
        assert code == EXIT_OK
        assert f"entries\t{len(LEXICON_ROWS)}" in out
        assert lexicon_tsv.read_bytes() == original

    def test_duplicate_add_is_a_noop(self, capsys, lexicon_tsv):
        code, out, _ = run(
            capsys, "lexicon", "add", "--lexicon", lexicon_tsv,
            "--surface", "red", "--category", "song",
        )
        assert code == EXIT_OK
        assert f"entries\t{len(LEXICON_ROWS)}" in out

    def test_add_without_surface_is_usage_error(self, capsys, lexicon_tsv):
        code, _, _ = run(capsys, "lexicon", "add", "--lexicon", lexicon_tsv)
        assert code == EXIT_USAGE

    def test_remove_absent_entry_is_data_error(self, capsys, lexicon_tsv):
        code, _, _ = run(
            capsys, "lexicon", "remove", "--lexicon", lexicon_tsv,
            "--surface", "nonesuch", "--category", "song",
        )
        assert code == EXIT_DATA


class TestMatchCommand:
    def test_dump_format_and_content(self, capsys, lexicon_tsv):
        code, out, _ = run(
            capsys, "match", "play taylor swift sparks fly", "--lexicon", lexicon_tsv
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        # default top-1 per start: the two-word singer beats the one-word name
        assert lines == ["2:4\tsinger", "3:4\tname", "4:6\tsong"]

    def test_unlimited_top_n_keeps_prefix_matches(self, capsys, lexicon_tsv):
        code, out, _ = run(
            capsys, "match", "play taylor swift sparks fly",
            "--lexicon", lexicon_tsv, "--top-n", "none",
        )
        assert code == EXIT_OK
        assert "2:3\tname" in out.splitlines()

    def test_no_hits_exits_clean(self, capsys, lexicon_tsv):
        code, out, _ = run(capsys, "match", "nothing here matches", "--lexicon", lexicon_tsv)
        assert code == EXIT_OK
        assert out == ""

    def test_empty_sentence_is_usage_error(self, capsys, lexicon_tsv):
        code, _, _ = run(capsys, "match", "   ", "--lexicon", lexicon_tsv)
        assert code == EXIT_USAGE


class TestSynthCommand:
    def synth(self, capsys, outdir, *extra):
        return run(
            capsys, "synth", "--out", outdir,
            "--train-size", 6, "--dev-size", 2, "--test-size", 2, *extra,
        )

    def test_writes_all_files(self, capsys, tmp_path):
        code, out, _ = self.synth(capsys, tmp_path / "d", "--seed", 1)
        assert code == EXIT_OK
        for key in ("train", "dev", "test", "lexicon_0", "lexicon_1", "train_variants"):
            assert any(line.startswith(f"{key}\t") for line in out.splitlines())
        assert (tmp_path / "d" / "train.conll").is_file()

    def test_seed_determinism(self, capsys, tmp_path):
        self.synth(capsys, tmp_path / "a", "--seed", 5)
        self.synth(capsys, tmp_path / "b", "--seed", 5)
        self.synth(capsys, tmp_path / "c", "--seed", 6)
        read = lambda d: (tmp_path / d / "train.conll").read_bytes()
        assert read("a") == read("b")
        assert read("a") != read("c")

    def test_env_seed_used_when_flag_absent(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("LEXTAG_SEED", "5")
        self.synth(capsys, tmp_path / "env")
        monkeypatch.delenv("LEXTAG_SEED")
        self.synth(capsys, tmp_path / "flag", "--seed", 5)
        assert (tmp_path / "env" / "train.conll").read_bytes() == (
            tmp_path / "flag" / "train.conll"
        ).read_bytes()

    def test_flag_beats_env_seed(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("LEXTAG_SEED", "9")
        self.synth(capsys, tmp_path / "x", "--seed", 5)
        self.synth(capsys, tmp_path / "y", "--seed", 5)
        assert (tmp_path / "x" / "train.conll").read_bytes() == (
            tmp_path / "y" / "train.conll"
        ).read_bytes()

    def test_bad_env_seed_is_data_error(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("LEXTAG_SEED", "not-a-number")
        code, _, _ = self.synth(capsys, tmp_path / "z")
        assert code == EXIT_DATA


TRAIN_FLAGS = ("--hz", 8, "--head-count", 2, "--batch-size", 4, "--vocab-size", 120)


class TestTrainCommand:
    def test_zero_epochs_writes_loadable_checkpoint(self, capsys, tmp_path, corpus_path, lexicon_tsv):
        ckpt = tmp_path / "model.ckpt"
        code, out, _ = run(
            capsys, "train", "--corpus", corpus_path, "--dev", corpus_path,
            "--lexicon", lexicon_tsv, "--out", ckpt, "--epochs", 0, *TRAIN_FLAGS,
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0].startswith("epoch\t")
        assert lines[-1] == f"checkpoint\t{ckpt}"
        assert len(lines) == 2  # header + checkpoint path, no epochs
        from lextag.model import load_checkpoint

        model, extras = load_checkpoint(ckpt)
        assert "tokenizer_pieces" in extras
        assert sorted(extras["categories"]) == ["misc", "name", "singer", "song"]

    def test_metrics_file_matches_stdout(self, capsys, tmp_path, corpus_path, lexicon_tsv):
        ckpt = tmp_path / "model.ckpt"
        metrics = tmp_path / "metrics.tsv"
        code, out, _ = run(
            capsys, "train", "--corpus", corpus_path, "--dev", corpus_path,
            "--lexicon", lexicon_tsv, "--out", ckpt, "--metrics", metrics,
            "--epochs", 1, *TRAIN_FLAGS,
        )
        assert code == EXIT_OK
        logged = metrics.read_text().splitlines()
        assert logged[0].startswith("epoch\t")
        assert len(logged) == 2  # header + one epoch
        assert logged[1] in out

    def test_config_file_applies_and_flag_wins(self, capsys, tmp_path, corpus_path, lexicon_tsv):
        config = tmp_path / "settings.cfg"
        config.write_text("epochs = 1\nhz = 8\nhead_count = 2\nbatch_size = 4\nvocab_size = 120\n")
        # file alone: one epoch line
        code, out, _ = run(
            capsys, "train", "--corpus", corpus_path, "--dev", corpus_path,
            "--lexicon", lexicon_tsv, "--out", tmp_path / "a.ckpt", "--config", config,
        )
        assert code == EXIT_OK
        assert len(out.splitlines()) == 3  # header + 1 epoch + checkpoint
        # flag overrides the file's epochs
        code, out, _ = run(
            capsys, "train", "--corpus", corpus_path, "--dev", corpus_path,
            "--lexicon", lexicon_tsv, "--out", tmp_path / "b.ckpt", "--config", config,
            "--epochs", 0,
        )
        assert code == EXIT_OK
        assert len(out.splitlines()) == 2

    def test_unknown_config_key_rejected(self, capsys, tmp_path, corpus_path):
        config = tmp_path / "bad.cfg"
        config.write_text("momentum = 0.9\n")
        code, _, err = run(
            capsys, "train", "--corpus", corpus_path, "--dev", corpus_path,
            "--out", tmp_path / "x.ckpt", "--config", config,
        )
        assert code == EXIT_DATA
        assert "unknown setting" in err

    def test_bad_config_value_rejected(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("epochs = soon\n")
        with pytest.raises(Exception, match="bad value"):
            load_config_file(config)

    def test_config_file_parses_comments_and_booleans(self, tmp_path):
        config = tmp_path / "ok.cfg"
        config.write_text("# comment\n\nsigmoid_tagger = yes\ntop_n = none\nepochs = 3\n")
        settings = load_config_file(config)
        assert settings == {"sigmoid_tagger": True, "top_n": None, "epochs": 3}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One small trained checkpoint shared by the eval/predict tests."""
    root = tmp_path_factory.mktemp("trained")
    corpus = root / "tiny.conll"
    corpus.write_text(CORPUS, encoding="utf-8")
    lexicon = root / "lexicon.tsv"
    lexicon.write_text("".join(f"{s}\t{c}\n" for s, c in LEXICON_ROWS), encoding="utf-8")
    ckpt = root / "model.ckpt"
    code = main([
        "train", "--corpus", str(corpus), "--dev", str(corpus),
        "--lexicon", str(lexicon), "--out", str(ckpt),
        "--epochs", "2", "--hz", "8", "--head-count", "2",
        "--batch-size", "4", "--vocab-size", "120", "--seed", "0",
    ])
    assert code == EXIT_OK
    return {"corpus": corpus, "lexicon": lexicon, "ckpt": ckpt}


class TestEvalCommand:
    def test_report_lines(self, capsys, trained):
        code, out, _ = run(
            capsys, "eval", "--checkpoint", trained["ckpt"],
            "--corpus", trained["corpus"], "--lexicon", trained["lexicon"],
        )
        assert code == EXIT_OK
        keys = [line.split("\t")[0] for line in out.splitlines()]
        for want in ("span_precision", "span_recall", "span_f1", "denoise_accuracy"):
            assert want in keys

    def test_eval_without_lexicon_is_baseline(self, capsys, trained):
        code, out, _ = run(
            capsys, "eval", "--checkpoint", trained["ckpt"], "--corpus", trained["corpus"]
        )
        assert code == EXIT_OK
        assert "denoise_accuracy\t1.0000" in out.splitlines()

    def test_bad_checkpoint_is_data_error(self, capsys, trained, tmp_path):
        junk = tmp_path / "junk.ckpt"
        junk.write_bytes(b"not a checkpoint at all")
        code, _, _ = run(
            capsys, "eval", "--checkpoint", junk, "--corpus", trained["corpus"]
        )
        assert code == EXIT_DATA


class TestPredictCommand:
    def test_output_format(self, capsys, trained, tmp_path):
        inp = tmp_path / "input.txt"
        inp.write_text("play taylor swift\n\nnow red\n", encoding="utf-8")
        code, out, _ = run(
            capsys, "predict", "--checkpoint", trained["ckpt"],
            "--lexicon", trained["lexicon"], "--input", inp,
        )
        assert code == EXIT_OK
        blocks = out.strip("\n").split("\n\n")
        assert len(blocks) == 2  # blank input lines are skipped
        first = [line.split("\t") for line in blocks[0].splitlines()]
        assert [w for w, _ in first] == ["play", "taylor", "swift"]
        for _, label in first:
            assert label == "O" or label.partition("-")[0] in ("B", "I")

    def test_predict_without_lexicon_runs(self, capsys, trained, tmp_path):
        inp = tmp_path / "input.txt"
        inp.write_text("play something\n", encoding="utf-8")
        code, out, _ = run(capsys, "predict", "--checkpoint", trained["ckpt"], "--input", inp)
        assert code == EXIT_OK
        assert out.splitlines()[0].startswith("play\t")


class TestGradcheck:
    def test_passes_and_prints_error(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--hz", 8, "--tokens", 6, "--candidates", 2)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0].startswith("max_rel_err\t")
        reported = float(lines[0].split("\t")[1])
        assert reported <= GRADCHECK_TOLERANCE

    def test_deterministic_output(self, capsys):
        _, first, _ = run(capsys, "gradcheck", "--hz", 8, "--tokens", 6, "--candidates", 2)
        _, second, _ = run(capsys, "gradcheck", "--hz", 8, "--tokens", 6, "--candidates", 2)
        assert first == second

    def test_oversize_request_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "gradcheck", "--hz", 64)
        assert code == EXIT_USAGE

    def test_detects_corrupted_backward(self, capsys, monkeypatch):
        """Negative control: a wrong op gradient must fail the whole check."""
        true_sigmoid = T.sigmoid

        def poisoned(a):
            out = true_sigmoid(a)
            values = out.values

            def bad_bw(g):
                T._accum(a, g * values * (1.0 - values) * 1.5)

            return T._record(values, (a,), bad_bw)

        monkeypatch.setattr(T, "sigmoid", poisoned)
        code, out, err = run(capsys, "gradcheck", "--hz", 8, "--tokens", 6, "--candidates", 2)
        assert code == EXIT_VERIFY
        assert float(out.splitlines()[0].split("\t")[1]) > GRADCHECK_TOLERANCE
        assert "failed" in err
