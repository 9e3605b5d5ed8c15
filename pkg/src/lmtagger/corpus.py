"""Corpus parsing, vocabularies, label-scheme conversion, char streams.

The character stream mirrors the model's notation: a sentence of n
words becomes space, chars(x_1), space, chars(x_2), ..., chars(x_n),
space, with the n+1 space positions recorded as boundaries. Word
lookups are case-insensitive; the character stream preserves case.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .layers import embedding_uniform

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
SPACE_CHAR = " "
START_LABEL = "<start>"


@dataclass(frozen=True)
class LabeledSentence:
    words: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.words) == 0:
            raise DataError("sentence must contain at least one word")
        if len(self.words) != len(self.labels):
            raise DataError(
                f"{len(self.words)} words vs {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.words)


@dataclass(frozen=True)
class CharStream:
    """Character ids with the n+1 positions of the boundary spaces."""

    char_ids: tuple[int, ...]
    boundaries: tuple[int, ...]


@dataclass(frozen=True)
class Span:
    """Closed word-index interval carrying one entity type."""

    label: str
    start: int
    end: int


class Vocabulary:
    """Bijection between retained tokens and dense ids.

    ``lower=True`` folds lookups to lowercase (word vocabulary); stored
    tokens are then lowercase already. Without an UNK token, lookups of
    unknown strings fail instead of mapping somewhere arbitrary.
    """

    __slots__ = ("itos", "stoi", "unk_token", "unk_id", "lower")

    def __init__(self, tokens: Iterable[str], unk_token: str | None = None, lower: bool = False):
        self.itos: list[str] = list(tokens)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise DataError("duplicate tokens in vocabulary")
        self.lower = lower
        self.unk_token = unk_token
        if unk_token is not None and unk_token not in self.stoi:
            raise DataError(f"unk token {unk_token!r} not among tokens")
        self.unk_id = self.stoi[unk_token] if unk_token is not None else None

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        if self.lower:
            token = token.lower()
        return token in self.stoi

    def lookup(self, token: str) -> int:
        if self.lower:
            token = token.lower()
        hit = self.stoi.get(token)
        if hit is not None:
            return hit
        if self.unk_id is None:
            raise DataError(f"token {token!r} not in vocabulary and no unk defined")
        return self.unk_id

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def as_dict(self) -> dict:
        return {"tokens": self.itos, "unk_token": self.unk_token, "lower": self.lower}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["tokens"], unk_token=d["unk_token"], lower=d["lower"])


# -- CoNLL column format -------------------------------------------------------


def parse_conll(text: str) -> list[LabeledSentence]:
    """One token per line (word first, label last), blank line ends a sentence.

    ``-DOCSTART-`` marker lines are skipped. An empty file yields an
    empty list.
    """
    sentences: list[LabeledSentence] = []
    words: list[str] = []
    labels: list[str] = []

    def flush():
        if words:
            sentences.append(LabeledSentence(tuple(words), tuple(labels)))
            words.clear()
            labels.clear()

    for lineno, line in enumerate(text.splitlines(), start=1):
        cols = line.split()
        if not cols:
            flush()
            continue
        if cols[0] == "-DOCSTART-":
            continue
        if len(cols) < 2:
            raise ParseError(f"line {lineno}: expected word and label, got {line!r}")
        words.append(cols[0])
        labels.append(cols[-1])
    flush()
    return sentences


def serialize_conll(sentences: Sequence[LabeledSentence]) -> str:
    blocks = []
    for s in sentences:
        blocks.append("\n".join(f"{w} {t}" for w, t in zip(s.words, s.labels)))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# -- vocabularies ----------------------------------------------------------------


def build_vocab(
    sentences: Sequence[LabeledSentence], min_freq: int = 5,
) -> tuple[Vocabulary, Vocabulary, Vocabulary]:
    """Word, character, and label vocabularies from training sentences.

    Words below ``min_freq`` (counted over lowercased forms) fall to the
    UNK id; the char vocabulary keeps every character seen plus space,
    UNK, and padding specials; labels get a synthetic start symbol
    appended last, so real labels occupy ids 0..L-1.
    """
    if not sentences:
        raise DataError("cannot build vocabularies from an empty corpus")
    word_freq: Counter[str] = Counter()
    chars: set[str] = set()
    label_order: dict[str, None] = {}
    word_order: dict[str, None] = {}
    for s in sentences:
        for w in s.words:
            lw = w.lower()
            word_freq[lw] += 1
            word_order.setdefault(lw, None)
            chars.update(w)
        for y in s.labels:
            label_order.setdefault(y, None)

    kept = [w for w in word_order if word_freq[w] >= min_freq]
    word_vocab = Vocabulary([PAD_TOKEN, UNK_TOKEN, *kept], unk_token=UNK_TOKEN, lower=True)
    char_tokens = [PAD_TOKEN, UNK_TOKEN, SPACE_CHAR, *sorted(chars - {SPACE_CHAR})]
    char_vocab = Vocabulary(char_tokens, unk_token=UNK_TOKEN)
    label_vocab = Vocabulary([*label_order, START_LABEL])
    return word_vocab, char_vocab, label_vocab


# -- BIOES span scheme -------------------------------------------------------------


def _split_label(label: str) -> tuple[str, str]:
    """Total parse of a label into (tag, type).

    ``O`` and the empty string are outside. A recognized prefix (B-,
    I-, E-, S-) yields that tag. Anything else is read as a bare
    single-token span of its own type, keeping decoding total.
    """
    if label == "O" or label == "":
        return "O", ""
    if len(label) >= 2 and label[1] == "-" and label[0] in "BIES":
        return label[0], label[2:]
    return "S", label


def decode_bioes(labels: Sequence[str]) -> list[Span]:
    """Spans under lenient reading: illegal continuations restart a span.

    Total on arbitrary label sequences; matches standard chunk-evaluation
    semantics (a type change or non-continuation closes the open span at
    the previous token).
    """
    spans: list[Span] = []
    open_type: str | None = None
    open_start = 0
    for j, label in enumerate(labels):
        tag, typ = _split_label(label)
        if open_type is not None:
            if tag in ("I", "E") and typ == open_type:
                if tag == "E":
                    spans.append(Span(open_type, open_start, j))
                    open_type = None
                continue
            spans.append(Span(open_type, open_start, j - 1))
            open_type = None
        if tag == "O":
            continue
        if tag in ("S", "E"):
            # dangling E starts nothing to extend; both close immediately
            spans.append(Span(typ, j, j))
        else:
            open_type = typ
            open_start = j
    if open_type is not None:
        spans.append(Span(open_type, open_start, len(labels) - 1))
    return spans


def render_bioes(spans: Sequence[Span], length: int) -> list[str]:
    """Labels for non-overlapping spans; everything else is O."""
    out = ["O"] * length
    for sp in spans:
        if not 0 <= sp.start <= sp.end < length:
            raise DataError(f"span {sp} outside sentence of length {length}")
        if any(out[k] != "O" for k in range(sp.start, sp.end + 1)):
            raise DataError(f"span {sp} overlaps another span")
        if sp.start == sp.end:
            out[sp.start] = f"S-{sp.label}"
        else:
            out[sp.start] = f"B-{sp.label}"
            for k in range(sp.start + 1, sp.end):
                out[k] = f"I-{sp.label}"
            out[sp.end] = f"E-{sp.label}"
    return out


def encode_bioes(labels: Sequence[str]) -> list[str]:
    """BIO (or mixed) labels to BIOES; idempotent on valid BIOES input."""
    return render_bioes(decode_bioes(labels), len(labels))


# -- character stream ---------------------------------------------------------------


def build_char_stream(sentence: LabeledSentence, char_vocab: Vocabulary) -> CharStream:
    space_id = char_vocab.lookup(SPACE_CHAR)
    ids: list[int] = [space_id]
    boundaries: list[int] = [0]
    for word in sentence.words:
        ids.extend(char_vocab.lookup(ch) for ch in word)
        ids.append(space_id)
        boundaries.append(len(ids) - 1)
    return CharStream(tuple(ids), tuple(boundaries))


# -- pretrained embeddings --------------------------------------------------------------


@dataclass(frozen=True)
class EmbeddingCoverage:
    found: int
    total: int

    @property
    def fraction(self) -> float:
        return self.found / self.total if self.total else 0.0


def load_pretrained_embeddings(
    path: str,
    word_vocab: Vocabulary,
    dim: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, EmbeddingCoverage]:
    """Table |V|×dim: file vectors where found, ±sqrt(3/dim) rows elsewhere.

    The file holds one entry per line: token then dim reals. Vocabulary
    matching is case-insensitive (the vocabulary stores lowercase).
    """
    table = embedding_uniform(rng, len(word_vocab), dim)
    found = 0
    file_dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if file_dim is None:
                file_dim = len(values)
                if file_dim != dim:
                    raise ConfigError(
                        f"embedding file has {file_dim}-dim vectors, config wants {dim}")
            if len(values) != file_dim:
                raise ParseError(
                    f"line {lineno}: expected {file_dim} values, got {len(values)}")
            idx = word_vocab.stoi.get(token.lower())
            if idx is None:
                continue
            try:
                table[idx] = [float(v) for v in values]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: bad real value ({exc})") from None
            found += 1
    return table, EmbeddingCoverage(found=found, total=len(word_vocab))
