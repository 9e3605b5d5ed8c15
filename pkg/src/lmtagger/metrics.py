"""Span-level micro precision/recall/F1 and token accuracy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Span, decode_bioes
from .errors import DataError


@dataclass(frozen=True)
class PRF:
    """Pooled exact-match counts; rates derived, 0 where undefined."""

    tp: int
    predicted: int
    gold: int

    @property
    def precision(self) -> float:
        return self.tp / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r else 0.0


def span_prf(
    gold: Sequence[Sequence[Span]], predicted: Sequence[Sequence[Span]],
) -> PRF:
    """Micro-averaged over all sentences: a hit needs type, start, and end.

    Span collections are treated as sets per sentence; counts pool over
    the corpus before any rate is formed.
    """
    if len(gold) != len(predicted):
        raise DataError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    tp = n_pred = n_gold = 0
    for g, p in zip(gold, predicted):
        gs, ps = set(g), set(p)
        tp += len(gs & ps)
        n_pred += len(ps)
        n_gold += len(gs)
    return PRF(tp=tp, predicted=n_pred, gold=n_gold)


def token_accuracy(
    gold: Sequence[Sequence[str]], predicted: Sequence[Sequence[str]],
) -> float:
    if len(gold) != len(predicted):
        raise DataError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    correct = total = 0
    for k, (g, p) in enumerate(zip(gold, predicted)):
        if len(g) != len(p):
            raise DataError(f"sentence {k}: {len(g)} gold labels vs {len(p)} predicted")
        correct += sum(a == b for a, b in zip(g, p))
        total += len(g)
    if total == 0:
        raise DataError("no tokens to score")
    return correct / total


def evaluate_labels(
    gold: Sequence[Sequence[str]], predicted: Sequence[Sequence[str]], metric: str,
) -> float:
    """Single scalar for model selection: span F1 or token accuracy."""
    if metric == "f1":
        return span_prf([decode_bioes(g) for g in gold],
                        [decode_bioes(p) for p in predicted]).f1
    if metric == "accuracy":
        return token_accuracy(gold, predicted)
    raise DataError(f"unknown metric {metric!r}")


def span_report(
    gold: Sequence[Sequence[Span]], predicted: Sequence[Sequence[Span]],
) -> str:
    """Per-type and overall lines in the familiar chunk-evaluation layout."""
    overall = span_prf(gold, predicted)
    types = sorted({s.label for sent in gold for s in sent}
                   | {s.label for sent in predicted for s in sent})
    lines = [
        "processed {} sentences; found: {} spans; correct: {}.".format(
            len(gold), overall.predicted, overall.tp),
        "accuracy metrics (span exact match):",
        "  overall: precision {:6.2%}; recall {:6.2%}; F1 {:6.2%}".format(
            overall.precision, overall.recall, overall.f1),
    ]
    for typ in types:
        sub = span_prf(
            [[s for s in sent if s.label == typ] for sent in gold],
            [[s for s in sent if s.label == typ] for sent in predicted])
        lines.append(
            "  {:>12}: precision {:6.2%}; recall {:6.2%}; F1 {:6.2%}  ({} predicted)".format(
                typ, sub.precision, sub.recall, sub.f1, sub.predicted))
    return "\n".join(lines)
