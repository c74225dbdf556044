"""Message-passing layers over the interference graph.

Layer k maps node features Y (rows = pairs) through

    Z_j = Y_j T1 + sum_{i != j} e_ij (Y_j T2 - Y_i T3),    out = LeakyReLU(Z)

with scalar edge weights e_ij. Weights are shared across nodes, so the same
parameters evaluate on any number of pairs and outputs permute with the input.
All passes accept a leading batch axis: Y is (B, M, F), edges are (B, M, M).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, StaleCache
from .graphfeat import GraphSample
from .nncore import glorot_uniform, leaky_relu_backward, leaky_relu_forward


@dataclass
class GnnLayerParams:
    theta1: np.ndarray  # (F_in, F_out), self term
    theta2: np.ndarray  # (F_in, F_out), own features scaled by incoming edge mass
    theta3: np.ndarray  # (F_in, F_out), neighbor aggregate
    slope: float = 0.01

    @property
    def f_in(self) -> int:
        return self.theta1.shape[0]

    @property
    def f_out(self) -> int:
        return self.theta1.shape[1]


def init_gnn(rng: np.random.Generator, dims: tuple = (4, 64, 64), slope: float = 0.01) -> list:
    """One GnnLayerParams per consecutive dim pair."""
    layers = []
    for fi, fo in zip(dims[:-1], dims[1:]):
        layers.append(
            GnnLayerParams(
                theta1=glorot_uniform(rng, fi, fo),
                theta2=glorot_uniform(rng, fi, fo),
                theta3=glorot_uniform(rng, fi, fo),
                slope=slope,
            )
        )
    return layers


@dataclass
class NodeEmbeddings:
    values: np.ndarray  # (M, F_K)

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass
class GnnCache:
    edges: np.ndarray  # (B, M, M), diagonal zeroed
    edge_mass: np.ndarray  # (B, M), incoming edge sums per node
    per_layer: list  # (y_in, neighbor_agg, z) per layer
    dims: tuple  # layer (f_in, f_out) signature, to catch stale caches


def _as_batch(arr: np.ndarray, ndim: int):
    if arr.ndim == ndim:
        return arr[None, ...], True
    if arr.ndim == ndim + 1:
        return arr, False
    raise ShapeMismatch(f"expected {ndim} or {ndim + 1} dims, got {arr.ndim}")


def gnn_forward_batch(layers: list, y: np.ndarray, edges: np.ndarray):
    """y: (B, M, F0), edges: (B, M, M) -> ((B, M, F_K), GnnCache)."""
    if y.ndim != 3 or edges.ndim != 3:
        raise ShapeMismatch("batched GNN expects (B, M, F) features and (B, M, M) edges")
    if edges.shape[:2] != y.shape[:2] or edges.shape[1] != edges.shape[2]:
        raise ShapeMismatch(f"edges {edges.shape} do not match features {y.shape}")
    if y.shape[-1] != layers[0].f_in:
        raise ShapeMismatch(f"feature dim {y.shape[-1]} != layer input {layers[0].f_in}")

    e = edges.copy()
    idx = np.arange(e.shape[1])
    e[:, idx, idx] = 0.0  # no self messages
    mass = e.sum(axis=1)  # incoming edge mass per destination node
    e_t = np.swapaxes(e, 1, 2)

    per_layer = []
    h = y
    for layer in layers:
        agg = e_t @ h  # agg[b, j] = sum_i e[b, i, j] * h[b, i]
        z = h @ layer.theta1 + mass[..., None] * (h @ layer.theta2) - agg @ layer.theta3
        per_layer.append((h, agg, z))
        h, _ = leaky_relu_forward(z, layer.slope)
    cache = GnnCache(
        edges=e,
        edge_mass=mass,
        per_layer=per_layer,
        dims=tuple((l.f_in, l.f_out) for l in layers),
    )
    return h, cache


def gnn_backward_batch(layers: list, cache: GnnCache, dout: np.ndarray):
    """Gradients for every theta and for the input features.

    Returns ([(dtheta1, dtheta2, dtheta3) per layer], dy).
    """
    if cache.dims != tuple((l.f_in, l.f_out) for l in layers):
        raise StaleCache("cache was built for a different layer stack")
    if dout.shape != cache.per_layer[-1][2].shape:
        raise StaleCache(f"upstream gradient shape {dout.shape} does not match forward output")

    e = cache.edges
    mass = cache.edge_mass
    grads = [None] * len(layers)
    dh = dout
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        y_in, agg, z = cache.per_layer[k]
        dz = leaky_relu_backward(dh, z, layer.slope)
        flat = lambda a: a.reshape(-1, a.shape[-1])
        dt1 = flat(y_in).T @ flat(dz)
        dt2 = flat(mass[..., None] * y_in).T @ flat(dz)
        dt3 = -(flat(agg).T @ flat(dz))
        dh = (
            dz @ layer.theta1.T
            + mass[..., None] * (dz @ layer.theta2.T)
            - e @ (dz @ layer.theta3.T)
        )
        grads[k] = (dt1, dt2, dt3)
    return grads, dh


def gnn_forward(sample: GraphSample, layers: list):
    """Single-sample wrapper: GraphSample -> (NodeEmbeddings, cache)."""
    out, cache = gnn_forward_batch(layers, sample.node_features[None, ...], sample.edge_weights[None, ...])
    return NodeEmbeddings(values=out[0]), cache


def gnn_backward(layers: list, cache: GnnCache, upstream: np.ndarray):
    """Single-sample wrapper around gnn_backward_batch; upstream is (M, F_K)."""
    grads, dy = gnn_backward_batch(layers, cache, upstream[None, ...])
    return grads, dy[0]
