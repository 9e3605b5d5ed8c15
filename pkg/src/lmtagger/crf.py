"""Linear-chain CRF over word-level feature vectors.

Pairwise log-potential: log φ(y', y, z_j) = W_{y',y}·z_j + b_{y',y},
with one synthetic START index usable only as a predecessor (there is
no end transition). Partition and NLL run on the autodiff tape so the
objective trains W, b, and the features feeding them; decoding is plain
array arithmetic.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import logsumexp as _sp_logsumexp

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .errors import DataError, ShapeError
from .layers import glorot_uniform

BRUTE_FORCE_LIMIT = 10 ** 6


class CrfLayer:
    """Transition-conditioned emission weights W (L+1)·L×Z and biases b (L+1)×L.

    Row layout of ``w``: predecessor-major, i.e. row y'·L + y carries the
    Z-vector for the pair (y', y). Predecessor index L is START.
    """

    def __init__(self, num_labels: int, feature_dim: int, rng: np.random.Generator, name: str = "crf"):
        if num_labels < 1:
            raise DataError(f"need at least one label, got {num_labels}")
        self.num_labels = num_labels
        self.feature_dim = feature_dim
        self.start_id = num_labels
        self.name = name
        self.w = Parameter(
            glorot_uniform(rng, (num_labels + 1) * num_labels, feature_dim), f"{name}.w")
        self.b = Parameter(np.zeros((num_labels + 1, num_labels)), f"{name}.b")

    def parameters(self) -> list[Parameter]:
        return [self.w, self.b]

    def pair_scores(self, z: Tensor) -> Tensor:
        """All pair log-potentials at one position: (L+1)×L tensor."""
        if z.shape != (self.feature_dim,):
            raise ShapeError(f"feature shape {z.shape}, expected ({self.feature_dim},)")
        flat = ad.matmul(self.w, z)
        return ad.reshape(flat, (self.num_labels + 1, self.num_labels)) + self.b

    def pair_scores_array(self, z: np.ndarray) -> np.ndarray:
        """Same potentials without tape recording, for decode-time use."""
        w3 = self.w.data.reshape(self.num_labels + 1, self.num_labels, self.feature_dim)
        return w3 @ z + self.b.data


def _check_instance(crf: CrfLayer, zs: Sequence[Tensor]) -> None:
    if len(zs) == 0:
        raise DataError("need at least one position")
    for z in zs:
        if z.shape != (crf.feature_dim,):
            raise ShapeError(f"feature shape {z.shape}, expected ({crf.feature_dim},)")


def sequence_score(crf: CrfLayer, zs: Sequence[Tensor], y: Sequence[int]) -> Tensor:
    """Log-domain score Σ_j W_{y_{j-1},y_j}·z_j + b_{y_{j-1},y_j}, y_0 = START."""
    _check_instance(crf, zs)
    if len(y) != len(zs):
        raise ShapeError(f"{len(y)} labels for {len(zs)} positions")
    L = crf.num_labels
    for yj in y:
        if not 0 <= yj < L:
            raise IndexError(f"label id {yj} outside [0, {L})")
    total = None
    prev = crf.start_id
    for z, yj in zip(zs, y):
        term = ad.tsum(ad.row(crf.w, prev * L + yj) * z) + ad.element(crf.b, prev, yj)
        total = term if total is None else total + term
        prev = yj
    return total


def log_partition(crf: CrfLayer, zs: Sequence[Tensor]) -> Tensor:
    """log Σ over all label sequences of exp(sequence_score), forward algorithm."""
    _check_instance(crf, zs)
    L = crf.num_labels
    alpha = ad.row(crf.pair_scores(zs[0]), crf.start_id)
    for z in zs[1:]:
        block = ad.rows(crf.pair_scores(z), 0, L)  # (y', y) over real labels
        alpha = ad.logsumexp(ad.reshape(alpha, (L, 1)) + block, axis=0)
    return ad.logsumexp(alpha)


def crf_nll(crf: CrfLayer, zs: Sequence[Tensor], y: Sequence[int]) -> Tensor:
    """Eq.-style negative log-likelihood: log Z(zs) − score(zs, y). Nonnegative."""
    return log_partition(crf, zs) - sequence_score(crf, zs, y)


def viterbi_decode(crf: CrfLayer, zs: Sequence[Tensor]) -> tuple[list[int], float]:
    """Highest-scoring label sequence and its score.

    Ties break toward the lowest label id at every backtracking step
    (first-maximum argmax), making the output deterministic.
    """
    _check_instance(crf, zs)
    L = crf.num_labels
    pair = crf.pair_scores_array(np.asarray(zs[0].data))
    delta = pair[crf.start_id]
    backptr: list[np.ndarray] = []
    for z in zs[1:]:
        pair = crf.pair_scores_array(np.asarray(z.data))
        scores = delta[:, None] + pair[:L]
        bp = np.argmax(scores, axis=0)
        backptr.append(bp)
        delta = scores[bp, np.arange(L)]
    last = int(np.argmax(delta))
    best_score = float(delta[last])
    labels = [last]
    for bp in reversed(backptr):
        labels.append(int(bp[labels[-1]]))
    labels.reverse()
    return labels, best_score


def brute_force_oracle(crf: CrfLayer, zs: Sequence[Tensor]) -> tuple[float, list[int], float]:
    """Exhaustive enumeration of all L^n sequences for small instances.

    Returns (log partition, argmax sequence, max score). The argmax tie
    rule matches backtracking: among max scorers, minimize the reversed
    label tuple (the backtracker fixes the last label first).
    """
    _check_instance(crf, zs)
    L, n = crf.num_labels, len(zs)
    if L ** n > BRUTE_FORCE_LIMIT:
        raise DataError(f"{L}^{n} sequences exceed the enumeration guard")
    seqs = np.indices((L,) * n).reshape(n, -1)
    pair = np.stack([crf.pair_scores_array(np.asarray(z.data)) for z in zs])
    scores = pair[0][crf.start_id, seqs[0]]
    for j in range(1, n):
        scores = scores + pair[j][seqs[j - 1], seqs[j]]
    log_z = float(_sp_logsumexp(scores))
    best = scores.max()
    ties = np.flatnonzero(scores == best)
    weights = L ** np.arange(n)  # position j weighted L^j: last label most significant
    keys = (seqs[:, ties] * weights[:, None]).sum(axis=0)
    pick = ties[np.argmin(keys)]
    return log_z, [int(v) for v in seqs[:, pick]], float(best)
