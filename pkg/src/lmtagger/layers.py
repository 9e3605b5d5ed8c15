"""Recurrent cells, highway units, and training-support utilities.

Everything here operates on :class:`~lmtagger.autodiff.Tensor` values so
gradients flow through an entire network assembled from these pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import NumericError, ShapeError


def glorot_uniform(rng: np.random.Generator, out_size: int, in_size: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (in_size + out_size))
    return rng.uniform(-limit, limit, size=(out_size, in_size))


def embedding_uniform(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Rows in ±sqrt(3/dim), giving each row roughly unit variance·dim."""
    limit = math.sqrt(3.0 / dim)
    return rng.uniform(-limit, limit, size=(count, dim))


class LstmCell:
    """Single-layer LSTM cell with separate per-gate affine maps.

    Each gate weight maps the concatenation [input; h_prev] of size
    D+H to H. Forget-gate bias starts at 1.0 so early training does not
    flush the cell state; all other biases start at zero.
    """

    def __init__(self, input_size: int, state_size: int, rng: np.random.Generator, name: str):
        self.input_size = input_size
        self.state_size = state_size
        self.name = name
        d = input_size + state_size
        self.w_i = Parameter(glorot_uniform(rng, state_size, d), f"{name}.w_i")
        self.w_f = Parameter(glorot_uniform(rng, state_size, d), f"{name}.w_f")
        self.w_g = Parameter(glorot_uniform(rng, state_size, d), f"{name}.w_g")
        self.w_o = Parameter(glorot_uniform(rng, state_size, d), f"{name}.w_o")
        self.b_i = Parameter(np.zeros(state_size), f"{name}.b_i")
        self.b_f = Parameter(np.ones(state_size), f"{name}.b_f")
        self.b_g = Parameter(np.zeros(state_size), f"{name}.b_g")
        self.b_o = Parameter(np.zeros(state_size), f"{name}.b_o")

    def parameters(self) -> list[Parameter]:
        return [self.w_i, self.w_f, self.w_g, self.w_o,
                self.b_i, self.b_f, self.b_g, self.b_o]

    def zero_state(self) -> tuple[Tensor, Tensor]:
        z = np.zeros(self.state_size)
        return Tensor(z), Tensor(z.copy())

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape != (self.input_size,):
            raise ShapeError(f"{self.name}: input shape {x.shape}, expected ({self.input_size},)")
        if h_prev.shape != (self.state_size,) or c_prev.shape != (self.state_size,):
            raise ShapeError(f"{self.name}: state shape {h_prev.shape}/{c_prev.shape}")
        z = ad.concat([x, h_prev])
        i = ad.sigmoid(ad.matmul(self.w_i, z) + self.b_i)
        f = ad.sigmoid(ad.matmul(self.w_f, z) + self.b_f)
        g = ad.tanh(ad.matmul(self.w_g, z) + self.b_g)
        o = ad.sigmoid(ad.matmul(self.w_o, z) + self.b_o)
        c = f * c_prev + i * g
        h = o * ad.tanh(c)
        return h, c


def lstm_step(cell: LstmCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    return cell.step(x, h_prev, c_prev)


class HighwayUnit:
    """Gated mix of a ReLU transform and the untouched input.

    m = t ⊙ relu(W_H n + b_H) + (1 − t) ⊙ n with t = σ(W_T n + b_T),
    so the output dimension is pinned to the input dimension.
    """

    def __init__(self, size: int, rng: np.random.Generator, name: str):
        self.size = size
        self.name = name
        self.w_h = Parameter(glorot_uniform(rng, size, size), f"{name}.w_h")
        self.b_h = Parameter(np.zeros(size), f"{name}.b_h")
        self.w_t = Parameter(glorot_uniform(rng, size, size), f"{name}.w_t")
        self.b_t = Parameter(np.zeros(size), f"{name}.b_t")

    def parameters(self) -> list[Parameter]:
        return [self.w_h, self.b_h, self.w_t, self.b_t]

    def apply(self, n: Tensor) -> Tensor:
        if n.shape != (self.size,):
            raise ShapeError(f"{self.name}: input shape {n.shape}, expected ({self.size},)")
        t = ad.sigmoid(ad.matmul(self.w_t, n) + self.b_t)
        transformed = ad.relu(ad.matmul(self.w_h, n) + self.b_h)
        one_minus_t = 1.0 - t
        return t * transformed + one_minus_t * n


def highway_apply(unit: HighwayUnit, n: Tensor) -> Tensor:
    return unit.apply(n)


def dropout_apply(x: Tensor, rate: float, mode: str, rng: np.random.Generator) -> Tensor:
    """Inverted dropout in train mode; the identity in eval mode."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    return ad.dropout(x, rate, rng)


def clip_gradients(params: Sequence[Parameter], threshold: float) -> float:
    """Scale all gradients by threshold/norm when the global L2 norm exceeds it.

    Returns the applied scale; 1.0 means untouched. All-zero gradients
    are left alone (norm 0 never exceeds a positive threshold).
    """
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    sq = 0.0
    for p in params:
        if p.grad is not None:
            sq += float((p.grad * p.grad).sum())
    norm = math.sqrt(sq)
    if norm <= threshold:
        return 1.0
    scale = threshold / norm
    for p in params:
        if p.grad is not None:
            p.grad *= scale
    return scale


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    max_rel_err: float
    n_checked: int
    tol: float
    worst: tuple[str, int, float, float] | None = None  # (param, flat index, analytic, numeric)
    failures: list[tuple[str, int, float, float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    h: float = 1e-5,
    tol: float = 1e-4,
    samples_per_param: int = 16,
    seed: int = 0,
) -> GradCheckReport:
    """Probe sampled coordinates of each parameter with central differences.

    ``loss_fn`` must rebuild the scalar loss from the parameters' current
    values on every call and be deterministic (dropout in eval mode).
    The relative-error denominator is floored at 1e-4 so coordinates
    where both gradients vanish do not divide rounding noise by itself.
    """
    rng = np.random.default_rng(seed)
    ad.zero_grads(params)
    loss = loss_fn()
    base = loss.item()
    if not math.isfinite(base):
        raise NumericError(f"loss is not finite: {base}")
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}

    report = GradCheckReport(max_rel_err=0.0, n_checked=0, tol=tol)
    for p in params:
        flat = p.data.ravel()
        n = flat.size
        if n <= samples_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=samples_per_param, replace=False)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            hi = loss_fn().item()
            flat[k] = orig - h
            lo = loss_fn().item()
            flat[k] = orig
            if not (math.isfinite(hi) and math.isfinite(lo)):
                raise NumericError("perturbed loss is not finite")
            numeric = (hi - lo) / (2.0 * h)
            a = float(analytic[p.name].ravel()[k])
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-4)
            report.n_checked += 1
            if rel > report.max_rel_err:
                report.max_rel_err = rel
                report.worst = (p.name, int(k), a, numeric)
            if rel >= tol:
                report.failures.append((p.name, int(k), a, numeric, rel))
    return report
