"""Command-line entry points: train, tag, eval.

Exit codes: 0 success, 1 usage or config problem, 2 data problem
(unreadable or malformed corpus/checkpoint files), 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .checkpoint import checkpoint_load
from .config import RunConfig, load_run_config, to_model_config, to_train_config
from .corpus import (
    LabeledSentence,
    build_vocab,
    decode_bioes,
    encode_bioes,
    load_pretrained_embeddings,
    parse_conll,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    LmTaggerError,
    NumericError,
    ParseError,
)
from .metrics import span_prf, span_report, token_accuracy
from .model import LmLstmCrf
from .trainer import history_lines, train_loop

# RunConfig fields that must agree with a loaded checkpoint when the user
# sets them explicitly. Vocabulary sizes are carried by the checkpoint and
# are not user-settable, so shape keys below cover the whole model config.
_CHECKPOINT_KEYS = ("char_emb_dim", "char_state", "word_emb_dim", "word_state",
                    "highway_depth", "lm_weight", "enable_lm", "enable_highway",
                    "dropout", "dropout_char_emb")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract says 1."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lmtagger", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a tagger from labeled corpora")
    p_train.add_argument("--config", required=True, metavar="PATH")
    p_train.add_argument("--seed", type=int, default=None, metavar="N")
    p_train.add_argument("--override", action="append", default=[],
                         metavar="KEY=VALUE", help="config override, flag wins")

    p_tag = sub.add_parser("tag", help="label a token-per-line file")
    p_tag.add_argument("--config", required=True, metavar="PATH")
    p_tag.add_argument("--input", required=True, metavar="PATH")
    p_tag.add_argument("--output", required=True, metavar="PATH")

    p_eval = sub.add_parser("eval", help="score a checkpoint on a labeled corpus")
    p_eval.add_argument("--config", required=True, metavar="PATH")
    p_eval.add_argument("--gold", required=True, metavar="PATH")
    return parser


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {what} {path}: {exc}") from None


def _load_corpus(path: str, what: str) -> list[LabeledSentence]:
    sentences = parse_conll(_read_text(path, what))
    if not sentences:
        raise DataError(f"{what} {path} contains no sentences")
    return [
        LabeledSentence(s.words, tuple(encode_bioes(s.labels))) for s in sentences
    ]


def _require(run: RunConfig, key: str, command: str) -> str:
    value = getattr(run, key)
    if value is None:
        raise ConfigError(f"{command} requires config key {key!r}")
    return value


def cmd_train(args) -> int:
    run, _ = load_run_config(args.config, args.override, args.seed)
    train_path = _require(run, "train_path", "train")
    dev_path = _require(run, "dev_path", "train")
    checkpoint_out = _require(run, "checkpoint_out", "train")
    history_out = run.history_out or checkpoint_out + ".history"

    train_set = _load_corpus(train_path, "training corpus")
    dev_set = _load_corpus(dev_path, "development corpus")

    word_vocab, char_vocab, label_vocab = build_vocab(train_set, min_freq=run.min_freq)
    model_cfg = to_model_config(run, len(word_vocab), len(char_vocab),
                                len(label_vocab) - 1)
    model = LmLstmCrf(model_cfg, word_vocab, char_vocab, label_vocab,
                      np.random.default_rng(run.seed))
    if run.embeddings_path:
        table, coverage = load_pretrained_embeddings(
            run.embeddings_path, word_vocab, run.word_emb_dim,
            np.random.default_rng(run.seed + 1))
        model.set_word_embeddings(table)
        print(f"embeddings: {coverage.found}/{coverage.total} words covered "
              f"({coverage.fraction:.1%})")

    counts = model.parameter_count()
    print(f"model: {counts['total']} parameters, "
          f"{len(train_set)} train / {len(dev_set)} dev sentences")

    result = train_loop(model, train_set, dev_set, to_train_config(run))

    with open(history_out, "w", encoding="utf-8") as fh:
        for line in history_lines(result.history):
            fh.write(line + "\n")
    print(f"history: {history_out}")
    print(f"checkpoint: {checkpoint_out}")
    print(f"best_epoch {result.best_epoch}")
    print(f"dev_{run.metric} {result.best_metric!r}")
    return 0


def _load_checkpoint_for(run: RunConfig, provided: set[str]):
    path = run.checkpoint_in
    if path is None:
        raise ConfigError("this command requires config key 'checkpoint_in'")
    model, opt = checkpoint_load(path)
    saved = model.config.as_dict()
    for key in _CHECKPOINT_KEYS:
        if key in provided and getattr(run, key) != saved[key]:
            raise ConfigError(
                f"config key {key!r} = {getattr(run, key)!r} does not match "
                f"checkpoint {path} ({key} = {saved[key]!r})")
    return model, opt


def _split_sentences(lines: list[str]) -> list[tuple[list[int], list[str]]]:
    """Group input lines into sentences: (line indices, words)."""
    sentences = []
    idx: list[int] = []
    words: list[str] = []
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.split()[0] == "-DOCSTART-":
            if words:
                sentences.append((idx, words))
                idx, words = [], []
            continue
        idx.append(i)
        words.append(stripped.split()[0])
    if words:
        sentences.append((idx, words))
    return sentences


def cmd_tag(args) -> int:
    run, provided = load_run_config(args.config)
    model, _ = _load_checkpoint_for(run, provided)

    text = _read_text(args.input, "input file")
    lines = text.splitlines()
    out_lines = list(lines)  # blanks and -DOCSTART- pass through verbatim
    for idx, words in _split_sentences(lines):
        sentence = LabeledSentence(tuple(words), tuple("O" for _ in words))
        predicted = model.predict_tags(sentence)
        for line_no, label in zip(idx, predicted):
            out_lines[line_no] = lines[line_no].rstrip() + " " + label

    with open(args.output, "w", encoding="utf-8") as fh:
        for line in out_lines:
            fh.write(line + "\n")
    print(f"tagged {len(lines)} lines -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    run, provided = load_run_config(args.config)
    model, _ = _load_checkpoint_for(run, provided)

    gold = _load_corpus(args.gold, "gold corpus")
    gold_labels = [list(s.labels) for s in gold]
    predicted = [model.predict_tags(s) for s in gold]

    if run.metric == "accuracy":
        acc = token_accuracy(gold_labels, predicted)
        print(f"accuracy {acc!r}")
    else:
        gold_spans = [decode_bioes(ls) for ls in gold_labels]
        pred_spans = [decode_bioes(ls) for ls in predicted]
        prf = span_prf(gold_spans, pred_spans)
        print(f"precision {prf.precision!r} recall {prf.recall!r} f1 {prf.f1!r}")
        print(span_report(gold_spans, pred_spans))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"train": cmd_train, "tag": cmd_tag, "eval": cmd_eval}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LmTaggerError as exc:  # anything package-specific not mapped above
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
