"""Feed-forward predictor with hand-written backpropagation.

The default network is ``d_in -> 64 -> ELU -> 32 -> ELU -> 1``. A "linear"
network (a single affine layer) is available for closed-form checks.

All functions accept a single feature vector of shape ``(d,)`` or a batch of
shape ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HIDDEN_SIZES = (64, 32)
LOSS_KINDS = ("bce", "score")


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Weights ``W_k`` of shape (fan_in, fan_out) and biases ``b_k`` of shape (fan_out,).

    ``loss_kind`` selects the per-sample loss: ``"bce"`` is binary
    cross-entropy on the logit, ``"score"`` returns the raw logit and ignores
    the label (used by the linear closed-form oracles).
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    loss_kind: str = "bce"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("weights and biases must be non-empty and paired")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        prev = self.weights[0].shape[0]
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or W.shape[0] != prev or b.shape != (W.shape[1],):
                raise DimensionError(
                    f"inconsistent layer shapes {W.shape} / {b.shape}"
                )
            prev = W.shape[1]
        if prev != 1:
            raise DimensionError("last layer must have a single output")

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def size(self) -> int:
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def arrays(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec: np.ndarray) -> "ModelParams":
        """Build params of this shape from a flat coefficient vector."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise DimensionError(f"expected flat vector of size {self.size}, got {vec.shape}")
        weights, biases = [], []
        pos = 0
        for W, b in zip(self.weights, self.biases):
            weights.append(vec[pos:pos + W.size].reshape(W.shape).copy())
            pos += W.size
            biases.append(vec[pos:pos + b.size].copy())
            pos += b.size
        return ModelParams(tuple(weights), tuple(biases), self.loss_kind)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _layer_sizes(d_in: int, linear: bool) -> list[int]:
    return [d_in, 1] if linear else [d_in, *HIDDEN_SIZES, 1]


def init_params(seed: int, d_in: int, *, linear: bool = False, loss_kind: str = "bce") -> ModelParams:
    """Random initialisation: ``N(0, 1/fan_in)`` weights, zero biases.

    Draws come from numpy's PCG64 generator (``np.random.default_rng(seed)``)
    layer by layer in order, so ``(seed, d_in)`` fixes the result bit for bit.
    """
    if d_in < 1:
        raise DimensionError(f"d_in must be >= 1, got {d_in}")
    rng = np.random.default_rng(seed)
    sizes = _layer_sizes(d_in, linear)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
        biases.append(np.zeros(fan_out))
    return ModelParams(tuple(weights), tuple(biases), loss_kind)


def zeros_like(params: ModelParams) -> ModelParams:
    return params.unflatten(np.zeros(params.size))


def elu(v: np.ndarray) -> np.ndarray:
    # expm1 on the clipped value avoids overflow warnings for large positive v
    return np.where(v > 0, v, np.expm1(np.minimum(v, 0.0)))


def elu_grad(v: np.ndarray) -> np.ndarray:
    return np.where(v > 0, 1.0, np.exp(np.minimum(v, 0.0)))


def sigmoid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-np.abs(t))
    return np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def bce_with_logits(logit, y):
    """``log(1 + e^logit) - y * logit`` in the overflow-free branch form."""
    logit = np.asarray(logit, dtype=np.float64)
    return np.maximum(logit, 0.0) + np.log1p(np.exp(-np.abs(logit))) - y * logit


def _as_batch(params: ModelParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.d_in:
        raise DimensionError(f"expected features of dimension {params.d_in}, got shape {x.shape}")
    return X, single


def _forward_cache(params: ModelParams, X: np.ndarray):
    acts = [X]
    pre = []
    a = X
    last = params.n_layers - 1
    for k, (W, b) in enumerate(zip(params.weights, params.biases)):
        h = a @ W + b
        pre.append(h)
        if k < last:
            a = elu(h)
            acts.append(a)
    return pre[-1][:, 0], acts, pre


def forward(params: ModelParams, x):
    """Logit(s) of the network; a float for a single vector."""
    X, single = _as_batch(params, x)
    logit, _, _ = _forward_cache(params, X)
    return float(logit[0]) if single else logit


def _loss_from_logit(params: ModelParams, logit, y):
    if params.loss_kind == "score":
        return logit
    return bce_with_logits(logit, y)


def _dloss_dlogit(params: ModelParams, logit, y):
    if params.loss_kind == "score":
        return np.ones_like(logit)
    return sigmoid(logit) - y


def _check_labels(params: ModelParams, y, n: int) -> np.ndarray:
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (n,))
    if params.loss_kind == "bce" and not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y


def loss(params: ModelParams, x, y):
    """Per-sample loss; a float for a single vector, an ``(n,)`` array for a batch."""
    X, single = _as_batch(params, x)
    yv = _check_labels(params, y, X.shape[0])
    logit, _, _ = _forward_cache(params, X)
    out = _loss_from_logit(params, logit, yv)
    return float(out[0]) if single else out


def _backward(params: ModelParams, X, y, row_weights=None, need_params=True):
    """Reverse pass.

    Returns the per-sample losses, the gradient of ``sum_i row_weights[i] * loss_i``
    w.r.t. the parameters, and the per-sample input gradients.
    """
    logit, acts, pre = _forward_cache(params, X)
    per_sample = _loss_from_logit(params, logit, y)
    if row_weights is None:
        row_weights = np.ones(X.shape[0])
    w = row_weights[:, None]
    delta = _dloss_dlogit(params, logit, y)[:, None]
    gW: list = [None] * params.n_layers
    gb: list = [None] * params.n_layers
    for k in range(params.n_layers - 1, -1, -1):
        if need_params:
            weighted = delta * w
            gW[k] = acts[k].T @ weighted
            gb[k] = weighted.sum(axis=0)
        delta = delta @ params.weights[k].T
        if k > 0:
            delta = delta * elu_grad(pre[k - 1])
    grads = ModelParams(tuple(gW), tuple(gb), params.loss_kind) if need_params else None
    return per_sample, grads, delta


def grad_params(params: ModelParams, x, y) -> ModelParams:
    """Gradient of the mean loss over the rows of ``x`` w.r.t. every parameter."""
    X, _ = _as_batch(params, x)
    yv = _check_labels(params, y, X.shape[0])
    n = X.shape[0]
    _, grads, _ = _backward(params, X, yv, np.full(n, 1.0 / n))
    return grads


def grad_input(params: ModelParams, x, y) -> np.ndarray:
    """Per-sample gradient of the loss w.r.t. the features (label held fixed)."""
    X, single = _as_batch(params, x)
    yv = _check_labels(params, y, X.shape[0])
    _, _, gx = _backward(params, X, yv, need_params=False)
    return gx[0] if single else gx


def loss_and_grads(params: ModelParams, X: np.ndarray, y: np.ndarray):
    """Batch helper: per-sample losses, mean-loss param gradient and per-sample input gradients."""
    X, _ = _as_batch(params, X)
    yv = _check_labels(params, y, X.shape[0])
    n = X.shape[0]
    return _backward(params, X, yv, np.full(n, 1.0 / n))


def predict(params: ModelParams, x) -> np.ndarray:
    """Class predictions: 1 iff logit >= 0."""
    X, single = _as_batch(params, x)
    logit, _, _ = _forward_cache(params, X)
    pred = (logit >= 0).astype(np.int64)
    return pred[0] if single else pred


def from_arrays(arrays: Sequence[np.ndarray], loss_kind: str = "bce") -> ModelParams:
    """Inverse of ``ModelParams.arrays``."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    return ModelParams(tuple(arrays[0::2]), tuple(arrays[1::2]), loss_kind)
