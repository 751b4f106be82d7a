"""Small shared building blocks: parameter init, linear maps, losses."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

__all__ = [
    "glorot_uniform",
    "zeros_param",
    "linear",
    "affine_layernorm",
    "nll_of_true_class",
    "one_hot",
]

LOG_EPS = 1e-12


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> Tensor:
    """Uniform init with the Glorot bound over the first two fan dimensions."""
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros_param(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def ones_param(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=True)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = T.matmul(x, weight)
    if bias is not None:
        out = T.add(out, bias)
    return out


def affine_layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    return T.add(T.mul(T.layernorm(x, axis=-1, eps=eps), gain), bias)


def ff_head(x: Tensor, w_ff: Tensor, b_ff: Tensor, ln_gain: Tensor, ln_bias: Tensor,
            w_cls: Tensor, b_cls: Tensor, p_drop: float, train: bool,
            rng: np.random.Generator | None) -> Tensor:
    """Feedforward classifier head: FF -> dropout -> layernorm -> ReLU ->
    linear -> softmax. Used by the predictor head and the DNN/GCN baselines."""
    a = linear(x, w_ff, b_ff)
    a = T.dropout(a, p_drop, train, rng)
    a = affine_layernorm(a, ln_gain, ln_bias)
    a = T.relu(a)
    return T.softmax(linear(a, w_cls, b_cls), axis=1)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def nll_of_true_class(probs: Tensor, labels: np.ndarray, eps: float = LOG_EPS) -> Tensor:
    """Mean negative log-likelihood of the true class.

    ``probs`` is a (batch, classes) tensor of already-normalized scores;
    ``eps`` keeps the log finite when a score collapses to 0.
    """
    if probs.data.shape[0] == 0:
        raise ValueError("empty batch")
    hot = one_hot(labels, probs.data.shape[1])
    picked = T.tensor_sum(T.mul(probs, hot), axis=1)
    return T.neg(T.tensor_mean(T.log(T.add(picked, eps))))
