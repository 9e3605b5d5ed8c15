"""End-to-end command behaviour through main(), including exit codes."""

import numpy as np
import pytest

from lmtagger.cli import main
from lmtagger.config import (
    RunConfig,
    build_run_config,
    load_run_config,
    parse_config_text,
    parse_override,
)
from lmtagger.errors import ConfigError

TRAIN_CONLL = """\
anna B-PER
visited O
oslo B-LOC
today O

pere B-PER
left O
lima B-LOC

anna B-PER
left O
oslo B-LOC
today O

pere B-PER
visited O
lima B-LOC
"""


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def base_config(tmp_path, **extra):
    keys = dict(
        train_path=write(tmp_path / "train.conll", TRAIN_CONLL),
        dev_path=write(tmp_path / "dev.conll", TRAIN_CONLL),
        checkpoint_out=str(tmp_path / "model.ckpt"),
        history_out=str(tmp_path / "history.tsv"),
        char_emb_dim=3, char_state=4, word_emb_dim=4, word_state=4,
        min_freq=1, batch_size=2, max_epochs=2, patience=50,
        dropout=0.25, metric="f1", seed=0,
    )
    keys.update(extra)
    lines = [f"{k} = {v}" for k, v in keys.items()]
    return write(tmp_path / "run.cfg", "\n".join(lines) + "\n")


class TestConfigFormat:
    def test_comments_and_blanks_ignored(self):
        pairs = parse_config_text("# top\n\nmetric = f1\n  # another\nseed = 4\n")
        assert pairs == {"metric": "f1", "seed": "4"}

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line"):
            parse_config_text("metric f1\n", source="line")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="no_such_key"):
            build_run_config({"no_such_key": "1"})

    def test_typed_values(self):
        run, provided = build_run_config(
            {"dropout": "0.3", "enable_lm": "false", "batch_size": "7"})
        assert run.dropout == 0.3 and run.enable_lm is False and run.batch_size == 7
        assert provided == {"dropout", "enable_lm", "batch_size"}

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match="batch_size"):
            build_run_config({"batch_size": "many"})

    def test_eta0_follows_metric(self):
        assert RunConfig(metric="f1").resolved_eta0 == 0.01
        assert RunConfig(metric="accuracy").resolved_eta0 == 0.015
        assert RunConfig(metric="f1", eta0=0.2).resolved_eta0 == 0.2

    def test_table_defaults(self):
        run = RunConfig()
        assert (run.char_emb_dim, run.char_state, run.highway_depth) == (30, 300, 1)
        assert (run.word_emb_dim, run.word_state) == (100, 300)
        assert (run.batch_size, run.momentum, run.decay, run.clip) == (10, 0.9, 0.05, 5.0)
        assert (run.dropout, run.patience, run.max_epochs, run.min_freq) == (0.5, 15, 200, 5)

    def test_range_validation(self):
        for bad in (dict(dropout=1.0), dict(metric="auc"), dict(char_state=0),
                    dict(momentum=1.0), dict(clip=0.0), dict(eta0=0.0)):
            with pytest.raises(ConfigError):
                RunConfig(**bad)

    def test_override_wins_over_file(self, tmp_path):
        cfg = write(tmp_path / "a.cfg", "seed = 1\nmetric = f1\n")
        run, _ = load_run_config(cfg, overrides=["seed=9"])
        assert run.seed == 9

    def test_seed_flag_wins_over_override(self, tmp_path):
        cfg = write(tmp_path / "a.cfg", "metric = f1\n")
        run, _ = load_run_config(cfg, overrides=["seed=9"], seed=3)
        assert run.seed == 3

    def test_malformed_override(self):
        with pytest.raises(ConfigError):
            parse_override("seedless")


class TestTrainCommand:
    def test_missing_dev_path_is_usage_error(self, tmp_path, capsys):
        cfg = base_config(tmp_path)
        text = (tmp_path / "run.cfg").read_text()
        text = "\n".join(l for l in text.splitlines() if not l.startswith("dev_path"))
        cfg2 = write(tmp_path / "nodev.cfg", text)
        assert main(["train", "--config", cfg2]) == 1
        assert "dev_path" in capsys.readouterr().err
        assert not (tmp_path / "model.ckpt").exists()  # failed before training

    def test_unknown_key_is_usage_error(self, tmp_path, capsys):
        cfg = base_config(tmp_path)
        assert main(["train", "--config", cfg, "--override", "wat=1"]) == 1
        assert "wat" in capsys.readouterr().err

    def test_malformed_corpus_reports_location(self, tmp_path, capsys):
        bad = write(tmp_path / "bad.conll", "anna B-PER\nsolo\n")
        cfg = base_config(tmp_path, train_path=bad)
        assert main(["train", "--config", cfg]) == 2
        assert "2" in capsys.readouterr().err  # line number surfaced

    def test_train_writes_artifacts(self, tmp_path, capsys):
        cfg = base_config(tmp_path)
        assert main(["train", "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert "dev_f1" in out
        assert (tmp_path / "model.ckpt").exists()
        history = (tmp_path / "history.tsv").read_text().splitlines()
        assert len(history) == 2
        assert all(len(line.split("\t")) == 5 for line in history)

    def test_same_seed_same_history(self, tmp_path, capsys):
        def run_once(sub):
            d = tmp_path / sub
            d.mkdir()
            cfg = base_config(d, seed=11)
            assert main(["train", "--config", cfg]) == 0
            lines = (d / "history.tsv").read_text().splitlines()
            # wall-clock column is the only nondeterministic field
            return [line.split("\t")[:4] for line in lines]

        assert run_once("one") == run_once("two")

    def test_seed_flag_changes_run(self, tmp_path, capsys):
        cfg = base_config(tmp_path, max_epochs=1)
        assert main(["train", "--config", cfg, "--seed", "0"]) == 0
        first = (tmp_path / "history.tsv").read_text()
        assert main(["train", "--config", cfg, "--seed", "5"]) == 0
        second = (tmp_path / "history.tsv").read_text()
        assert first.split("\t")[1] != second.split("\t")[1]


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One small trained checkpoint shared by tag/eval tests."""
    tmp_path = tmp_path_factory.mktemp("trained")
    cfg = base_config(tmp_path, max_epochs=8)
    code = main(["train", "--config", cfg])
    assert code == 0
    return tmp_path


def tag_config(tmp_path, trained, **extra):
    keys = dict(checkpoint_in=str(trained / "model.ckpt"), metric="f1")
    keys.update(extra)
    lines = [f"{k} = {v}" for k, v in keys.items()]
    return write(tmp_path / "tag.cfg", "\n".join(lines) + "\n")


class TestTagCommand:
    def test_empty_input_empty_output(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained)
        inp = write(tmp_path / "empty.txt", "")
        outp = tmp_path / "out.txt"
        assert main(["tag", "--config", cfg, "--input", inp, "--output", str(outp)]) == 0
        assert outp.read_text() == ""

    def test_line_count_preserved(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained)
        body = "-DOCSTART-\n\nanna\nvisited\noslo\n\npere\nleft\n\n"
        inp = write(tmp_path / "in.txt", body)
        outp = tmp_path / "out.txt"
        assert main(["tag", "--config", cfg, "--input", inp, "--output", str(outp)]) == 0
        out_lines = outp.read_text().splitlines()
        assert len(out_lines) == len(body.splitlines())
        assert out_lines[0] == "-DOCSTART-"
        assert out_lines[1] == ""
        for line in out_lines[2:5]:
            assert len(line.split()) == 2  # word + predicted label

    def test_existing_labels_ignored(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained)
        inp = write(tmp_path / "in.txt", "anna B-XXX\nvisited O\noslo B-YYY\n")
        outp = tmp_path / "out.txt"
        assert main(["tag", "--config", cfg, "--input", inp, "--output", str(outp)]) == 0
        for line in outp.read_text().splitlines():
            assert len(line.split()) == 3  # original columns plus prediction

    def test_config_mismatch_refused_by_name(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained, word_state=64)
        inp = write(tmp_path / "in.txt", "anna\n")
        outp = tmp_path / "out.txt"
        code = main(["tag", "--config", cfg, "--input", inp, "--output", str(outp)])
        assert code == 1
        assert "word_state" in capsys.readouterr().err

    def test_missing_checkpoint_key(self, tmp_path, trained, capsys):
        cfg = write(tmp_path / "none.cfg", "metric = f1\n")
        inp = write(tmp_path / "in.txt", "anna\n")
        code = main(["tag", "--config", cfg, "--input", inp, "--output",
                     str(tmp_path / "o.txt")])
        assert code == 1
        assert "checkpoint_in" in capsys.readouterr().err


class TestEvalCommand:
    def test_eval_runs_and_reports(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained)
        gold = write(tmp_path / "gold.conll", TRAIN_CONLL)
        assert main(["eval", "--config", cfg, "--gold", gold]) == 0
        out = capsys.readouterr().out
        first = out.splitlines()[0]
        assert first.startswith("precision ") and " f1 " in first
        p, r, f = (float(first.split()[i]) for i in (1, 3, 5))
        assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0
        assert f <= max(p, r) + 1e-12

    def test_accuracy_metric_path(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained, metric="accuracy")
        gold = write(tmp_path / "gold.conll", TRAIN_CONLL)
        assert main(["eval", "--config", cfg, "--gold", gold]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert first.startswith("accuracy ")
        assert 0.0 <= float(first.split()[1]) <= 1.0

    def test_gold_against_itself_is_perfect(self, tmp_path, capsys):
        # pass-through check on the metric plumbing: train to convergence on
        # the 4-sentence corpus, then evaluate on the training file
        cfg = base_config(tmp_path, max_epochs=60, eta0=0.4, dropout=0.0,
                          enable_lm="false", patience=60)
        assert main(["train", "--config", cfg]) == 0
        capsys.readouterr()
        ecfg = tag_config(tmp_path, tmp_path)
        gold = str(tmp_path / "train.conll")
        assert main(["eval", "--config", ecfg, "--gold", gold]) == 0
        first = capsys.readouterr().out.splitlines()[0]
        assert float(first.split()[5]) == 1.0

    def test_missing_gold_file(self, tmp_path, trained, capsys):
        cfg = tag_config(tmp_path, trained)
        assert main(["eval", "--config", cfg, "--gold",
                     str(tmp_path / "nope.conll")]) == 2


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self, capsys):
        assert main(["train"]) == 1

    def test_usage_errors_do_not_exit_process(self, capsys):
        # argparse would normally sys.exit(2); the wrapper must not
        got = main(["tag", "--config"])
        assert got == 1
