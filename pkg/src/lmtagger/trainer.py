"""Mini-batch SGD with momentum, LR decay, early stopping, checkpoints.

The whole loop is deterministic given a seed: one generator drives the
epoch shuffles and the dropout masks, dev evaluation runs in eval mode,
and the learning-rate schedule is a pure function of the epoch index.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .checkpoint import checkpoint_save
from .corpus import LabeledSentence
from .errors import DataError, NumericError
from .layers import clip_gradients
from .metrics import evaluate_labels
from .model import LmLstmCrf, batch_joint_loss


@dataclass
class OptimizerState:
    """Classical momentum: the velocity buffer carries the learning rate."""

    eta0: float
    decay: float = 0.05
    momentum: float = 0.9
    epoch: int = 0
    velocities: dict[str, np.ndarray] = field(default_factory=dict)


def learning_rate_at(opt: OptimizerState, t: int) -> float:
    """η_t = η_0 / (1 + ρ·t); t counts completed epochs, so t=0 first."""
    if t < 0:
        raise ValueError(f"epoch index must be >= 0, got {t}")
    return opt.eta0 / (1.0 + opt.decay * t)


def sgd_step(opt: OptimizerState, params: Sequence[Parameter], lr: float) -> None:
    """velocity ← μ·velocity − lr·grad; param += velocity; grads zeroed."""
    for p in params:
        v = opt.velocities.get(p.name)
        if v is None:
            v = opt.velocities[p.name] = np.zeros_like(p.data)
        v *= opt.momentum
        v -= lr * p.grad
        p.data += v
        p.grad[...] = 0.0


@dataclass
class TrainState:
    patience: int
    max_epochs: int
    epoch: int = 0
    best_metric: float = -math.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0
    last_improved: bool = False


def early_stop_update(state: TrainState, dev_metric: float) -> bool:
    """Record one epoch's dev metric; True means training should stop.

    Only a strict improvement resets the patience counter. The caller
    should act on ``state.last_improved`` (checkpointing) before
    honoring the stop signal, so an improvement on the final allowed
    epoch still wins.
    """
    if not math.isfinite(dev_metric):
        raise NumericError(f"dev metric is not finite: {dev_metric}")
    state.epoch += 1
    state.last_improved = dev_metric > state.best_metric
    if state.last_improved:
        state.best_metric = dev_metric
        state.best_epoch = state.epoch
        state.epochs_since_improvement = 0
    else:
        state.epochs_since_improvement += 1
    return (state.epochs_since_improvement >= state.patience
            or state.epoch >= state.max_epochs)


@dataclass(frozen=True)
class TrainConfig:
    eta0: float = 0.015
    decay: float = 0.05
    momentum: float = 0.9
    clip: float = 5.0
    batch_size: int = 10
    max_epochs: int = 200
    patience: int = 15
    seed: int = 0
    metric: str = "f1"   # dev-selection metric: "f1" or "accuracy"
    checkpoint_path: str | None = None


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_metric: float
    lr: float
    seconds: float


def history_lines(records: Sequence[EpochRecord]) -> list[str]:
    """One tab-separated line per epoch: epoch, loss, metric, lr, seconds."""
    return [
        f"{r.epoch}\t{r.train_loss!r}\t{r.dev_metric!r}\t{r.lr!r}\t{r.seconds:.3f}"
        for r in records
    ]


@dataclass
class TrainResult:
    history: list[EpochRecord]
    best_metric: float
    best_epoch: int
    stopped_early: bool


def evaluate_model(model: LmLstmCrf, sentences: Sequence[LabeledSentence], metric: str) -> float:
    gold = [list(s.labels) for s in sentences]
    predicted = [model.predict_tags(s) for s in sentences]
    return evaluate_labels(gold, predicted, metric)


LossFn = Callable[[LmLstmCrf, list[LabeledSentence], np.random.Generator], Tensor]


def train_loop(
    model: LmLstmCrf,
    train_set: Sequence[LabeledSentence],
    dev_set: Sequence[LabeledSentence],
    config: TrainConfig,
    loss_fn: LossFn | None = None,
) -> TrainResult:
    """Epochs of shuffled summed-loss batches; returns with best-dev weights.

    On improvement the parameters are snapshotted (and written to
    ``config.checkpoint_path`` when set, paired with the optimizer state
    of that moment); after stopping, the best snapshot is restored into
    the live model.
    """
    if not train_set:
        raise DataError("training set is empty")
    if not dev_set:
        raise DataError("dev set is empty")
    if loss_fn is None:
        loss_fn = lambda m, batch, rng: batch_joint_loss(m, batch, mode="train", rng=rng)

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    opt = OptimizerState(eta0=config.eta0, decay=config.decay, momentum=config.momentum)
    state = TrainState(patience=config.patience, max_epochs=config.max_epochs)
    order = np.arange(len(train_set))
    history: list[EpochRecord] = []
    best_params: dict[str, np.ndarray] = {}
    stopped_early = False

    for epoch_idx in range(config.max_epochs):
        started = time.perf_counter()
        lr = learning_rate_at(opt, epoch_idx)
        rng.shuffle(order)
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[lo:lo + config.batch_size]]
            ad.zero_grads(params)
            loss = loss_fn(model, batch, rng)
            value = loss.item()
            if not math.isfinite(value):
                raise NumericError(
                    f"epoch {epoch_idx + 1}, batch starting at {lo}: loss is {value}")
            epoch_loss += value
            loss.backward()
            clip_gradients(params, config.clip)
            sgd_step(opt, params, lr)
        opt.epoch += 1
        dev_metric = evaluate_model(model, dev_set, config.metric)
        stop = early_stop_update(state, dev_metric)
        history.append(EpochRecord(
            epoch=epoch_idx + 1, train_loss=epoch_loss, dev_metric=dev_metric,
            lr=lr, seconds=time.perf_counter() - started))
        if state.last_improved:
            best_params = {p.name: p.data.copy() for p in params}
            if config.checkpoint_path:
                checkpoint_save(config.checkpoint_path, model, opt)
        if stop:
            stopped_early = state.epoch < config.max_epochs
            break

    for p in params:
        if p.name in best_params:
            p.data[...] = best_params[p.name]
    return TrainResult(
        history=history, best_metric=state.best_metric,
        best_epoch=state.best_epoch, stopped_early=stopped_early)
