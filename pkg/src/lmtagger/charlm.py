"""Character-level bidirectional LSTMs with word-prediction heads.

Both directions read the space-delimited character stream; hidden
states are harvested at the n+1 word-boundary spaces. Four highway
units then split each direction into a language-model route and a
sequence-labeling route, so the two objectives stop competing for the
same feature space. The LM heads predict whole words (UNK included)
from the boundary states, never characters.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .corpus import CharStream
from .errors import ShapeError
from .layers import HighwayUnit, LstmCell, dropout_apply, embedding_uniform, glorot_uniform


class CharBiLM:
    """Char embeddings, two LSTMs, four highway routes, two LM heads.

    Each route holds ``highway_depth`` chained units; depth 0 drops the
    routes entirely (routing becomes the identity), which shrinks the
    parameter count by exactly 4·depth·(2·(H² + H)). The LM head
    weights are always allocated; a trainer that never evaluates the LM
    objective simply leaves their gradients at zero.
    """

    def __init__(
        self,
        char_vocab_size: int,
        word_vocab_size: int,
        char_dim: int,
        state_size: int,
        rng: np.random.Generator,
        highway_depth: int = 1,
        name: str = "charlm",
    ):
        if highway_depth < 0:
            raise ValueError(f"highway depth must be >= 0, got {highway_depth}")
        self.char_dim = char_dim
        self.state_size = state_size
        self.word_vocab_size = word_vocab_size
        self.highway_depth = highway_depth
        self.name = name
        self.char_emb = Parameter(
            embedding_uniform(rng, char_vocab_size, char_dim), f"{name}.char_emb")
        self.fwd_cell = LstmCell(char_dim, state_size, rng, f"{name}.fwd")
        self.bwd_cell = LstmCell(char_dim, state_size, rng, f"{name}.bwd")

        def route(tag: str) -> list[HighwayUnit]:
            return [HighwayUnit(state_size, rng, f"{name}.hw_{tag}.{d}")
                    for d in range(highway_depth)]

        self.hw_fwd_lm = route("fwd_lm")
        self.hw_fwd_sl = route("fwd_sl")
        self.hw_bwd_lm = route("bwd_lm")
        self.hw_bwd_sl = route("bwd_sl")
        self.w_fwd_lm = Parameter(
            glorot_uniform(rng, word_vocab_size, state_size), f"{name}.w_fwd_lm")
        self.w_bwd_lm = Parameter(
            glorot_uniform(rng, word_vocab_size, state_size), f"{name}.w_bwd_lm")

    @property
    def use_highway(self) -> bool:
        return self.highway_depth > 0

    def highway_units(self) -> list[HighwayUnit]:
        return [*self.hw_fwd_lm, *self.hw_fwd_sl, *self.hw_bwd_lm, *self.hw_bwd_sl]

    def parameters(self) -> list[Parameter]:
        out = [self.char_emb]
        out += self.fwd_cell.parameters()
        out += self.bwd_cell.parameters()
        for unit in self.highway_units():
            out += unit.parameters()
        out += [self.w_fwd_lm, self.w_bwd_lm]
        return out

    def lm_head_parameters(self) -> list[Parameter]:
        return [self.w_fwd_lm, self.w_bwd_lm]


def run_char_level(
    model: CharBiLM,
    stream: CharStream,
    dropout_rate: float = 0.0,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[list[Tensor], list[Tensor]]:
    """Boundary states (f, r), each a list of n+1 state vectors.

    f[i] is the forward LSTM's hidden state right after it consumed the
    i-th boundary space; r[i] is the backward LSTM's state right after
    its right-to-left pass consumed that same space. So f[i] summarizes
    the stream through word i, r[i] summarizes it from word i+1 back.
    Dropout on the character embeddings is off by default.
    """
    ids = stream.char_ids
    wanted = set(stream.boundaries)

    def embed(cid: int) -> Tensor:
        x = ad.row(model.char_emb, cid)
        if dropout_rate > 0.0:
            x = dropout_apply(x, dropout_rate, mode, rng)
        return x

    f_at: dict[int, Tensor] = {}
    h, c = model.fwd_cell.zero_state()
    for t, cid in enumerate(ids):
        h, c = model.fwd_cell.step(embed(cid), h, c)
        if t in wanted:
            f_at[t] = h
    r_at: dict[int, Tensor] = {}
    h, c = model.bwd_cell.zero_state()
    for t in range(len(ids) - 1, -1, -1):
        h, c = model.bwd_cell.step(embed(ids[t]), h, c)
        if t in wanted:
            r_at[t] = h
    f = [f_at[b] for b in stream.boundaries]
    r = [r_at[b] for b in stream.boundaries]
    return f, r


def route_highway(
    model: CharBiLM, f: Sequence[Tensor], r: Sequence[Tensor],
) -> tuple[list[Tensor], list[Tensor], list[Tensor], list[Tensor]]:
    """Per-boundary routes (fL, fN, rL, rN); the identity without highways."""
    if not model.use_highway:
        return list(f), list(f), list(r), list(r)

    def chain(units, states):
        out = list(states)
        for unit in units:
            out = [unit.apply(v) for v in out]
        return out

    f_lm = chain(model.hw_fwd_lm, f)
    f_sl = chain(model.hw_fwd_sl, f)
    r_lm = chain(model.hw_bwd_lm, r)
    r_sl = chain(model.hw_bwd_sl, r)
    return f_lm, f_sl, r_lm, r_sl


def lm_loss_parts(
    model: CharBiLM,
    f_lm: Sequence[Tensor],
    r_lm: Sequence[Tensor],
    targets: Sequence[int],
) -> tuple[Tensor, Tensor]:
    """Forward and backward word-prediction NLLs, separately.

    The forward head predicts word i from the state before it
    (f_lm[i-1]); the backward head predicts word i from the state after
    it (r_lm[i]). Softmax runs over the full word vocabulary.
    """
    n = len(targets)
    if len(f_lm) != n + 1 or len(r_lm) != n + 1:
        raise ShapeError(f"{n} targets need n+1 boundary states, got {len(f_lm)}/{len(r_lm)}")
    targets = list(targets)

    def direction_nll(states: Sequence[Tensor], head: Parameter) -> Tensor:
        stacked = ad.stack(list(states))                      # (n, H)
        logits = ad.matmul(stacked, ad.transpose(head))       # (n, V)
        gold = ad.pick(logits, targets)
        return ad.tsum(ad.logsumexp(logits, axis=1) - gold)

    fwd = direction_nll(f_lm[:n], model.w_fwd_lm)
    bwd = direction_nll(r_lm[1:], model.w_bwd_lm)
    return fwd, bwd


def lm_loss(
    model: CharBiLM,
    f_lm: Sequence[Tensor],
    r_lm: Sequence[Tensor],
    targets: Sequence[int],
) -> Tensor:
    fwd, bwd = lm_loss_parts(model, f_lm, r_lm, targets)
    return fwd + bwd


def perplexity(nll: float, count: int) -> float:
    """exp(nll / count): the effective branching factor of the predictions."""
    if count < 1:
        raise ValueError(f"word count must be positive, got {count}")
    return math.exp(nll / count)
