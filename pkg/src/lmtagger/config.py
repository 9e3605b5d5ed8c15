"""Run configuration: flat key=value files plus command-line overrides.

The file format is one `key = value` pair per line, `#` comments, blank
lines ignored. Later duplicates win, and command-line overrides win over
the file. Every key maps to one RunConfig field.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Optional

from .errors import ConfigError
from .model import ModelConfig
from .trainer import TrainConfig

_TRUTHY = {"true": True, "yes": True, "1": True,
           "false": False, "no": False, "0": False}


def _parse_bool(text: str) -> bool:
    try:
        return _TRUTHY[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {text!r}") from None


def _parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_float(text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_str(text: str) -> str:
    return text.strip()


@dataclass(frozen=True)
class RunConfig:
    """Everything one train/tag/eval invocation needs, in one place."""

    # corpus and artifact paths
    train_path: Optional[str] = None
    dev_path: Optional[str] = None
    test_path: Optional[str] = None
    embeddings_path: Optional[str] = None
    checkpoint_in: Optional[str] = None
    checkpoint_out: Optional[str] = None
    history_out: Optional[str] = None
    # model shape
    char_emb_dim: int = 30
    char_state: int = 300
    word_emb_dim: int = 100
    word_state: int = 300
    highway_depth: int = 1
    lm_weight: float = 1.0
    enable_lm: bool = True
    enable_highway: bool = True
    dropout: float = 0.5
    dropout_char_emb: bool = False
    min_freq: int = 5
    # optimizer
    eta0: Optional[float] = None  # resolved from metric when left unset
    decay: float = 0.05
    momentum: float = 0.9
    clip: float = 5.0
    batch_size: int = 10
    max_epochs: int = 200
    patience: int = 15
    # task
    metric: str = "f1"
    seed: int = 0

    def __post_init__(self):
        positive_ints = ("char_emb_dim", "char_state", "word_emb_dim",
                         "word_state", "batch_size", "max_epochs")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("highway_depth", "min_freq", "patience", "seed"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.lm_weight < 0.0:
            raise ConfigError(f"lm_weight must be >= 0, got {self.lm_weight}")
        if self.decay < 0.0:
            raise ConfigError(f"decay must be >= 0, got {self.decay}")
        if self.clip <= 0.0:
            raise ConfigError(f"clip must be > 0, got {self.clip}")
        if self.eta0 is not None and self.eta0 <= 0.0:
            raise ConfigError(f"eta0 must be > 0, got {self.eta0}")
        if self.metric not in ("f1", "accuracy"):
            raise ConfigError(f"metric must be 'f1' or 'accuracy', got {self.metric!r}")

    @property
    def resolved_eta0(self) -> float:
        """Explicit eta0, else the task default: 0.015 accuracy, 0.01 f1."""
        if self.eta0 is not None:
            return self.eta0
        return 0.015 if self.metric == "accuracy" else 0.01


_PATH_KEYS = ("train_path", "dev_path", "test_path", "embeddings_path",
              "checkpoint_in", "checkpoint_out", "history_out")

_FIELD_PARSERS: dict[str, Callable[[str], object]] = {}
for _f in fields(RunConfig):
    if _f.name in _PATH_KEYS or _f.name == "metric":
        _FIELD_PARSERS[_f.name] = _parse_str
    elif _f.type in ("int", "Optional[int]"):
        _FIELD_PARSERS[_f.name] = _parse_int
    elif _f.type in ("float", "Optional[float]"):
        _FIELD_PARSERS[_f.name] = _parse_float
    elif _f.type == "bool":
        _FIELD_PARSERS[_f.name] = _parse_bool
    else:  # pragma: no cover - catches future field-type drift
        raise AssertionError(f"no parser for RunConfig.{_f.name}: {_f.type}")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key -> value-string pairs from a flat config document."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        pairs[key] = value.strip()
    return pairs


def parse_override(text: str) -> tuple[str, str]:
    """Split one --override argument of the form key=value."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, _, value = text.partition("=")
    if not key.strip():
        raise ConfigError(f"override must look like key=value, got {text!r}")
    return key.strip(), value.strip()


def build_run_config(pairs: dict[str, str]) -> tuple[RunConfig, set[str]]:
    """Typed RunConfig plus the set of keys the user actually supplied.

    The provided-key set lets commands distinguish "left at default" from
    "explicitly requested", which matters when checking a config against a
    checkpoint.
    """
    kwargs: dict[str, object] = {}
    for key, value in pairs.items():
        parser = _FIELD_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            kwargs[key] = parser(value)
        except ConfigError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    return RunConfig(**kwargs), set(kwargs)


def load_run_config(path: str, overrides: list[str] | None = None,
                    seed: int | None = None) -> tuple[RunConfig, set[str]]:
    """Read a config file and fold in CLI overrides (flag wins)."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    pairs = parse_config_text(text, source=path)
    for item in overrides or []:
        key, value = parse_override(item)
        pairs[key] = value
    if seed is not None:
        pairs["seed"] = str(seed)
    return build_run_config(pairs)


def to_model_config(run: RunConfig, word_vocab_size: int, char_vocab_size: int,
                    num_labels: int) -> ModelConfig:
    return ModelConfig(
        word_vocab_size=word_vocab_size,
        char_vocab_size=char_vocab_size,
        num_labels=num_labels,
        char_emb_dim=run.char_emb_dim,
        char_state=run.char_state,
        word_emb_dim=run.word_emb_dim,
        word_state=run.word_state,
        highway_depth=run.highway_depth,
        lm_weight=run.lm_weight,
        enable_lm=run.enable_lm,
        enable_highway=run.enable_highway,
        dropout=run.dropout,
        dropout_char_emb=run.dropout_char_emb,
    )


def to_train_config(run: RunConfig) -> TrainConfig:
    return TrainConfig(
        eta0=run.resolved_eta0,
        decay=run.decay,
        momentum=run.momentum,
        clip=run.clip,
        batch_size=run.batch_size,
        max_epochs=run.max_epochs,
        patience=run.patience,
        seed=run.seed,
        metric=run.metric,
        checkpoint_path=run.checkpoint_out,
    )
