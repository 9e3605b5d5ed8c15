"""Full network: embeddings, char routes, word bi-LSTM, CRF, joint loss.

Word i's input is v_i = [emb(x_i); f^N_i; r^N_{i-1}]: the forward char
state at the space after the word and the backward char state at the
space before it. A word-level bi-LSTM turns the v sequence into z
features for the CRF; the LM routes feed the word-prediction heads.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .charlm import CharBiLM, lm_loss, route_highway, run_char_level
from .corpus import LabeledSentence, Vocabulary, build_char_stream
from .crf import CrfLayer, crf_nll, viterbi_decode
from .errors import ConfigError, ShapeError
from .layers import LstmCell, dropout_apply, embedding_uniform


@dataclass(frozen=True)
class ModelConfig:
    word_vocab_size: int
    char_vocab_size: int
    num_labels: int          # real labels; the CRF adds its own START row
    char_emb_dim: int = 30
    char_state: int = 300
    word_emb_dim: int = 100
    word_state: int = 300
    highway_depth: int = 1
    lm_weight: float = 1.0   # λ in the joint objective
    enable_lm: bool = True
    enable_highway: bool = True
    dropout: float = 0.5
    dropout_char_emb: bool = False

    def __post_init__(self):
        for field_name in ("word_vocab_size", "char_vocab_size", "num_labels",
                           "char_emb_dim", "char_state", "word_emb_dim", "word_state"):
            if getattr(self, field_name) < 1:
                raise ConfigError(f"{field_name} must be positive, got {getattr(self, field_name)}")
        if self.highway_depth < 0:
            raise ConfigError(f"highway_depth must be >= 0, got {self.highway_depth}")
        if self.lm_weight < 0:
            raise ConfigError(f"lm_weight must be >= 0, got {self.lm_weight}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def feature_dim(self) -> int:
        """z_i dimension seen by the CRF."""
        return 2 * self.word_state

    @property
    def word_input_dim(self) -> int:
        """v_i dimension entering the word bi-LSTM."""
        return self.word_emb_dim + 2 * self.char_state

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class LmLstmCrf:
    """The complete tagger; owns its vocabularies and all parameters."""

    def __init__(
        self,
        config: ModelConfig,
        word_vocab: Vocabulary,
        char_vocab: Vocabulary,
        label_vocab: Vocabulary,
        rng: np.random.Generator,
    ):
        if config.word_vocab_size != len(word_vocab):
            raise ConfigError(
                f"config says {config.word_vocab_size} words, vocabulary has {len(word_vocab)}")
        if config.char_vocab_size != len(char_vocab):
            raise ConfigError(
                f"config says {config.char_vocab_size} chars, vocabulary has {len(char_vocab)}")
        if config.num_labels != len(label_vocab) - 1:
            raise ConfigError(
                f"config says {config.num_labels} labels, vocabulary has {len(label_vocab) - 1}")
        self.config = config
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.label_vocab = label_vocab
        self.word_emb = Parameter(
            embedding_uniform(rng, len(word_vocab), config.word_emb_dim), "word_emb")
        depth = config.highway_depth if config.enable_highway else 0
        self.charlm = CharBiLM(
            len(char_vocab), len(word_vocab), config.char_emb_dim, config.char_state,
            rng, highway_depth=depth)
        self.word_fwd = LstmCell(config.word_input_dim, config.word_state, rng, "word_fwd")
        self.word_bwd = LstmCell(config.word_input_dim, config.word_state, rng, "word_bwd")
        self.crf = CrfLayer(config.num_labels, config.feature_dim, rng)

    # -- parameter bookkeeping ----------------------------------------------

    def parameter_groups(self) -> dict[str, list[Parameter]]:
        highway = []
        for unit in self.charlm.highway_units():
            highway += unit.parameters()
        return {
            "word_embeddings": [self.word_emb],
            "char_embeddings": [self.charlm.char_emb],
            "char_lstms": self.charlm.fwd_cell.parameters() + self.charlm.bwd_cell.parameters(),
            "highway_units": highway,
            "lm_heads": self.charlm.lm_head_parameters(),
            "word_lstms": self.word_fwd.parameters() + self.word_bwd.parameters(),
            "crf": self.crf.parameters(),
        }

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for group in self.parameter_groups().values():
            out += group
        return out

    def parameter_count(self) -> dict[str, int]:
        counts = {name: sum(p.size for p in group)
                  for name, group in self.parameter_groups().items()}
        counts["total"] = sum(counts.values())
        return counts

    def set_word_embeddings(self, table: np.ndarray) -> None:
        if table.shape != self.word_emb.shape:
            raise ShapeError(f"embedding table {table.shape}, expected {self.word_emb.shape}")
        self.word_emb.data[...] = table

    # -- forward passes --------------------------------------------------------

    def encode_words(self, sentence: LabeledSentence) -> list[int]:
        return [self.word_vocab.lookup(w) for w in sentence.words]

    def encode_labels(self, sentence: LabeledSentence) -> list[int]:
        return [self.label_vocab.lookup(y) for y in sentence.labels]

    def assemble_inputs(
        self,
        sentence: LabeledSentence,
        f_sl: Sequence[Tensor],
        r_sl: Sequence[Tensor],
    ) -> list[Tensor]:
        """v_i = [emb(x_i); f^N_i; r^N_{i-1}] with the off-by-one backward pairing."""
        n = len(sentence)
        if len(f_sl) != n + 1 or len(r_sl) != n + 1:
            raise ShapeError(f"{n} words need n+1 boundary states, got {len(f_sl)}/{len(r_sl)}")
        ids = self.encode_words(sentence)
        return [
            ad.concat([ad.row(self.word_emb, ids[j]), f_sl[j + 1], r_sl[j]])
            for j in range(n)
        ]

    def forward(
        self,
        sentence: LabeledSentence,
        mode: str = "eval",
        rng: np.random.Generator | None = None,
    ) -> tuple[list[Tensor], list[Tensor], list[Tensor]]:
        """Per-word CRF features plus the LM route states: (Z, fL, rL)."""
        cfg = self.config
        stream = build_char_stream(sentence, self.char_vocab)
        char_rate = cfg.dropout if cfg.dropout_char_emb else 0.0
        f, r = run_char_level(self.charlm, stream, dropout_rate=char_rate, mode=mode, rng=rng)
        f_lm, f_sl, r_lm, r_sl = route_highway(self.charlm, f, r)
        v = self.assemble_inputs(sentence, f_sl, r_sl)
        v = [dropout_apply(x, cfg.dropout, mode, rng) for x in v]

        h, c = self.word_fwd.zero_state()
        fwd_states = []
        for x in v:
            h, c = self.word_fwd.step(x, h, c)
            fwd_states.append(h)
        h, c = self.word_bwd.zero_state()
        bwd_states: list[Tensor] = []
        for x in reversed(v):
            h, c = self.word_bwd.step(x, h, c)
            bwd_states.append(h)
        bwd_states.reverse()

        zs = [ad.concat([hf, hb]) for hf, hb in zip(fwd_states, bwd_states)]
        zs = [dropout_apply(z, cfg.dropout, mode, rng) for z in zs]
        return zs, f_lm, r_lm

    def joint_loss(
        self,
        sentence: LabeledSentence,
        mode: str = "train",
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """crf_nll + λ·lm_loss; exactly crf_nll when the LM term is off."""
        cfg = self.config
        zs, f_lm, r_lm = self.forward(sentence, mode=mode, rng=rng)
        y = self.encode_labels(sentence)
        nll = crf_nll(self.crf, zs, y)
        if not cfg.enable_lm or cfg.lm_weight == 0.0:
            return nll
        lm = lm_loss(self.charlm, f_lm, r_lm, self.encode_words(sentence))
        if cfg.lm_weight == 1.0:
            return nll + lm
        return nll + cfg.lm_weight * lm

    def predict_tags(self, sentence: LabeledSentence) -> list[str]:
        zs, _, _ = self.forward(sentence, mode="eval")
        label_ids, _ = viterbi_decode(self.crf, zs)
        return [self.label_vocab.token(i) for i in label_ids]


def batch_joint_loss(
    model: LmLstmCrf,
    sentences: Sequence[LabeledSentence],
    mode: str = "train",
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Sum (not mean) of per-sentence joint losses; learning rates assume this."""
    total = None
    for s in sentences:
        loss = model.joint_loss(s, mode=mode, rng=rng)
        total = loss if total is None else total + loss
    if total is None:
        raise ShapeError("batch must contain at least one sentence")
    return total
