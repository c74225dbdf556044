"""Minimal dense-layer toolkit: float64 forward/backward passes and Adam.

Everything is explicit numpy with caches handed from forward to backward, so
gradients can be checked against central finite differences coordinate-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StaleCache


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class Linear:
    w: np.ndarray  # (fan_in, fan_out)
    b: np.ndarray  # (fan_out,)


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int) -> Linear:
    return Linear(w=glorot_uniform(rng, fan_in, fan_out), b=np.zeros(fan_out))


def linear_forward(layer: Linear, x: np.ndarray):
    """x: (..., fan_in) -> (..., fan_out); cache is the input."""
    return x @ layer.w + layer.b, x


def linear_backward(layer: Linear, cache: np.ndarray, dy: np.ndarray):
    x = cache
    if x.shape[:-1] != dy.shape[:-1] or dy.shape[-1] != layer.w.shape[1]:
        raise StaleCache("linear backward got a cache from a different forward pass")
    dw = x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])
    db = dy.reshape(-1, dy.shape[-1]).sum(axis=0)
    dx = dy @ layer.w.T
    return dx, dw, db


def leaky_relu_forward(x: np.ndarray, slope: float):
    return np.where(x > 0.0, x, slope * x), x


def leaky_relu_backward(dy: np.ndarray, cache: np.ndarray, slope: float):
    if dy.shape != cache.shape:
        raise StaleCache("activation backward got a cache from a different forward pass")
    return dy * np.where(cache > 0.0, 1.0, slope)


def tanh_forward(x: np.ndarray):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy: np.ndarray, cache: np.ndarray):
    return dy * (1.0 - cache**2)


def softplus_forward(x: np.ndarray):
    # max(x, 0) + log1p(exp(-|x|)) avoids overflow on both tails
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))), x


def softplus_backward(dy: np.ndarray, cache: np.ndarray):
    return dy * sigmoid(cache)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def init_mlp(rng: np.random.Generator, dims: tuple) -> list:
    """Stack of Linear layers mapping dims[0] -> dims[1] -> ... -> dims[-1]."""
    return [init_linear(rng, fi, fo) for fi, fo in zip(dims[:-1], dims[1:])]


def mlp_forward(layers: list, x: np.ndarray, slope: float):
    """Linear + LeakyReLU after every layer; returns output and caches."""
    caches = []
    h = x
    for layer in layers:
        z, lin_cache = linear_forward(layer, h)
        h, act_cache = leaky_relu_forward(z, slope)
        caches.append((lin_cache, act_cache))
    return h, caches


def mlp_backward(layers: list, caches: list, dh: np.ndarray, slope: float):
    """Returns (dx, [(dw, db) per layer])."""
    grads = [None] * len(layers)
    for idx in range(len(layers) - 1, -1, -1):
        lin_cache, act_cache = caches[idx]
        dz = leaky_relu_backward(dh, act_cache, slope)
        dh, dw, db = linear_backward(layers[idx], lin_cache, dz)
        grads[idx] = (dw, db)
    return dh, grads


def global_norm(arrays: list) -> float:
    return float(np.sqrt(sum(float((a**2).sum()) for a in arrays)))


def clip_by_global_norm(arrays: list, max_norm: float) -> list:
    norm = global_norm(arrays)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        return [a * scale for a in arrays]
    return arrays


class Adam:
    """Adam over a flat list of arrays; callers pass grads in matching order."""

    def __init__(self, shapes: list, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float | None = 0.5):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list, grads: list):
        """Applies one minimization step in place."""
        if self.clip_norm is not None:
            grads = clip_by_global_norm(grads, self.clip_norm)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correct1 = 1.0 - b1**self.t
        correct2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g**2
            p -= self.lr * (m / correct1) / (np.sqrt(v / correct2) + self.eps)
