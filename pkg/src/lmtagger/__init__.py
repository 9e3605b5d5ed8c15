"""Sequence labeling with a co-trained character language model.

A word-level bidirectional LSTM-CRF tagger whose character layers double
as a forward and a backward language model; highway units keep the two
jobs from fighting over the shared states. Pure numpy on a small
reverse-mode tape, so everything is inspectable and exactly reproducible.
"""

from .autodiff import Parameter, Tensor, zero_grads
from .charlm import CharBiLM, lm_loss, perplexity
from .checkpoint import checkpoint_load, checkpoint_save
from .config import RunConfig, load_run_config
from .corpus import (
    LabeledSentence,
    Span,
    Vocabulary,
    build_vocab,
    decode_bioes,
    encode_bioes,
    load_pretrained_embeddings,
    parse_conll,
    render_bioes,
    serialize_conll,
)
from .crf import CrfLayer, crf_nll, log_partition, viterbi_decode
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    LmTaggerError,
    NumericError,
    ParseError,
    ShapeError,
)
from .metrics import evaluate_labels, span_prf, span_report, token_accuracy
from .model import LmLstmCrf, ModelConfig, batch_joint_loss
from .trainer import (
    OptimizerState,
    TrainConfig,
    TrainResult,
    learning_rate_at,
    sgd_step,
    train_loop,
)

__version__ = "0.1.0"

__all__ = [
    "Parameter", "Tensor", "zero_grads",
    "CharBiLM", "lm_loss", "perplexity",
    "checkpoint_load", "checkpoint_save",
    "RunConfig", "load_run_config",
    "LabeledSentence", "Span", "Vocabulary", "build_vocab",
    "decode_bioes", "encode_bioes", "render_bioes",
    "load_pretrained_embeddings", "parse_conll", "serialize_conll",
    "CrfLayer", "crf_nll", "log_partition", "viterbi_decode",
    "LmTaggerError", "ShapeError", "ParseError", "DataError",
    "ConfigError", "NumericError", "CheckpointError",
    "evaluate_labels", "span_prf", "span_report", "token_accuracy",
    "LmLstmCrf", "ModelConfig", "batch_joint_loss",
    "OptimizerState", "TrainConfig", "TrainResult",
    "learning_rate_at", "sgd_step", "train_loop",
    "__version__",
]
