"""Gaussian power policy and state-value critic over GNN embeddings.

The actor runs its own GNN stack, then a weight-shared per-node MLP with two
scalar heads: mean = (P_max/2) tanh(.) + P_max/2 and std = softplus(.) + 1e-3.
Powers are sampled per pair and clipped to [0, P_max]; the log-probability is
taken at the unclipped sample. The critic is a separate GNN stack whose node
embeddings are mean-pooled before an MLP that emits one value per state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .gnn import GnnLayerParams, gnn_backward_batch, gnn_forward_batch, init_gnn
from .graphfeat import GraphSample
from .nncore import (
    Linear,
    init_linear,
    init_mlp,
    linear_backward,
    linear_forward,
    mlp_backward,
    mlp_forward,
    softplus_backward,
    softplus_forward,
    tanh_backward,
    tanh_forward,
)

STD_FLOOR = 1e-3


@dataclass
class ActorParams:
    gnn: list  # GnnLayerParams stack
    mlp: list  # shared per-node hidden layers
    mean_head: Linear
    std_head: Linear
    p_max: float
    slope: float = 0.01


@dataclass
class CriticParams:
    gnn: list
    mlp: list
    head: Linear
    slope: float = 0.01


def init_actor(
    rng: np.random.Generator,
    p_max: float,
    feature_dim: int = 4,
    gnn_dims: tuple = (64, 64),
    hidden: tuple = (500, 250, 120),
    slope: float = 0.01,
) -> ActorParams:
    gnn = init_gnn(rng, (feature_dim, *gnn_dims), slope)
    mlp = init_mlp(rng, (gnn_dims[-1], *hidden))
    return ActorParams(
        gnn=gnn,
        mlp=mlp,
        mean_head=init_linear(rng, hidden[-1], 1),
        std_head=init_linear(rng, hidden[-1], 1),
        p_max=p_max,
        slope=slope,
    )


def init_critic(
    rng: np.random.Generator,
    feature_dim: int = 4,
    gnn_dims: tuple = (64, 64),
    hidden: tuple = (500, 250, 120),
    slope: float = 0.01,
) -> CriticParams:
    gnn = init_gnn(rng, (feature_dim, *gnn_dims), slope)
    mlp = init_mlp(rng, (gnn_dims[-1], *hidden))
    return CriticParams(gnn=gnn, mlp=mlp, head=init_linear(rng, hidden[-1], 1), slope=slope)


@dataclass
class ActorCache:
    gnn_cache: object
    mlp_caches: list
    mean_lin: object
    std_lin: object
    tanh_cache: np.ndarray
    softplus_cache: np.ndarray


def actor_forward_batch(params: ActorParams, y: np.ndarray, edges: np.ndarray):
    """(B, M, F) features -> means (B, M), stds (B, M), cache."""
    emb, gnn_cache = gnn_forward_batch(params.gnn, y, edges)
    h, mlp_caches = mlp_forward(params.mlp, emb, params.slope)
    mean_raw, mean_lin = linear_forward(params.mean_head, h)
    std_raw, std_lin = linear_forward(params.std_head, h)
    tanh_out, tanh_cache = tanh_forward(mean_raw)
    sp_out, sp_cache = softplus_forward(std_raw)
    mean = 0.5 * params.p_max * tanh_out[..., 0] + 0.5 * params.p_max
    std = sp_out[..., 0] + STD_FLOOR
    cache = ActorCache(gnn_cache, mlp_caches, mean_lin, std_lin, tanh_cache, sp_cache)
    return mean, std, cache


def actor_backward_batch(params: ActorParams, cache: ActorCache, dmean: np.ndarray, dstd: np.ndarray):
    """Chain upstream gradients on (mean, std) back to every parameter.

    Returns (grads in actor_param_arrays order, dfeatures).
    """
    dtanh = (0.5 * params.p_max) * dmean[..., None]
    dmean_raw = tanh_backward(dtanh, cache.tanh_cache)
    dstd_raw = softplus_backward(dstd[..., None], cache.softplus_cache)
    dh_mean, dw_m, db_m = linear_backward(params.mean_head, cache.mean_lin, dmean_raw)
    dh_std, dw_s, db_s = linear_backward(params.std_head, cache.std_lin, dstd_raw)
    demb, mlp_grads = mlp_backward(params.mlp, cache.mlp_caches, dh_mean + dh_std, params.slope)
    gnn_grads, dy = gnn_backward_batch(params.gnn, cache.gnn_cache, demb)

    flat = []
    for g1, g2, g3 in gnn_grads:
        flat.extend([g1, g2, g3])
    for dw, db in mlp_grads:
        flat.extend([dw, db])
    flat.extend([dw_m, db_m, dw_s, db_s])
    return flat, dy


def actor_param_arrays(params: ActorParams) -> list:
    """Live views of every trainable array, in the backward pass's order."""
    arrays = []
    for layer in params.gnn:
        arrays.extend([layer.theta1, layer.theta2, layer.theta3])
    for layer in params.mlp:
        arrays.extend([layer.w, layer.b])
    arrays.extend([params.mean_head.w, params.mean_head.b, params.std_head.w, params.std_head.b])
    return arrays


@dataclass
class CriticCache:
    gnn_cache: object
    mlp_caches: list
    head_lin: object
    m: int


def critic_forward_batch(params: CriticParams, y: np.ndarray, edges: np.ndarray):
    """(B, M, F) features -> values (B,), cache."""
    emb, gnn_cache = gnn_forward_batch(params.gnn, y, edges)
    pooled = emb.mean(axis=1)  # permutation-invariant readout
    h, mlp_caches = mlp_forward(params.mlp, pooled, params.slope)
    v, head_lin = linear_forward(params.head, h)
    return v[..., 0], CriticCache(gnn_cache, mlp_caches, head_lin, y.shape[1])


def critic_backward_batch(params: CriticParams, cache: CriticCache, dv: np.ndarray):
    """Returns (grads in critic_param_arrays order, dfeatures)."""
    dh, dw_h, db_h = linear_backward(params.head, cache.head_lin, dv[..., None])
    dpooled, mlp_grads = mlp_backward(params.mlp, cache.mlp_caches, dh, params.slope)
    demb = np.repeat(dpooled[:, None, :], cache.m, axis=1) / cache.m
    gnn_grads, dy = gnn_backward_batch(params.gnn, cache.gnn_cache, demb)

    flat = []
    for g1, g2, g3 in gnn_grads:
        flat.extend([g1, g2, g3])
    for dw, db in mlp_grads:
        flat.extend([dw, db])
    flat.extend([dw_h, db_h])
    return flat, dy


def critic_param_arrays(params: CriticParams) -> list:
    arrays = []
    for layer in params.gnn:
        arrays.extend([layer.theta1, layer.theta2, layer.theta3])
    for layer in params.mlp:
        arrays.extend([layer.w, layer.b])
    arrays.extend([params.head.w, params.head.b])
    return arrays


def actor_forward(params: ActorParams, sample: GraphSample):
    """Single-sample wrapper: -> (means (M,), stds (M,))."""
    mean, std, _ = actor_forward_batch(
        params, sample.node_features[None, ...], sample.edge_weights[None, ...]
    )
    return mean[0], std[0]


def critic_forward(params: CriticParams, sample: GraphSample) -> float:
    v, _ = critic_forward_batch(
        params, sample.node_features[None, ...], sample.edge_weights[None, ...]
    )
    return float(v[0])


@dataclass
class PowerAction:
    raw: np.ndarray  # unclipped Gaussian sample
    clipped: np.ndarray  # feasible powers in [0, P_max]
    log_prob: float  # density of the unclipped sample


def gaussian_log_prob(raw: np.ndarray, mean: np.ndarray, std: np.ndarray):
    """Sum of per-dimension Normal log densities over the last axis."""
    z = (raw - mean) / std
    return (-0.5 * z**2 - np.log(std) - 0.5 * np.log(2.0 * np.pi)).sum(axis=-1)


def sample_action(mean: np.ndarray, std: np.ndarray, rng: np.random.Generator, p_max: float) -> PowerAction:
    raw = rng.normal(mean, std)
    return PowerAction(
        raw=raw,
        clipped=np.clip(raw, 0.0, p_max),
        log_prob=float(gaussian_log_prob(raw, mean, std)),
    )


def save_policy(path, actor: ActorParams, critic: CriticParams):
    """Write both networks as one flat npz of named arrays."""
    arrays = {
        "meta.p_max": np.array(actor.p_max),
        "meta.actor_slope": np.array(actor.slope),
        "meta.critic_slope": np.array(critic.slope),
    }
    for k, layer in enumerate(actor.gnn):
        arrays[f"actor.gnn{k}.theta1"] = layer.theta1
        arrays[f"actor.gnn{k}.theta2"] = layer.theta2
        arrays[f"actor.gnn{k}.theta3"] = layer.theta3
    for k, layer in enumerate(actor.mlp):
        arrays[f"actor.mlp{k}.w"] = layer.w
        arrays[f"actor.mlp{k}.b"] = layer.b
    arrays["actor.mean_head.w"] = actor.mean_head.w
    arrays["actor.mean_head.b"] = actor.mean_head.b
    arrays["actor.std_head.w"] = actor.std_head.w
    arrays["actor.std_head.b"] = actor.std_head.b
    for k, layer in enumerate(critic.gnn):
        arrays[f"critic.gnn{k}.theta1"] = layer.theta1
        arrays[f"critic.gnn{k}.theta2"] = layer.theta2
        arrays[f"critic.gnn{k}.theta3"] = layer.theta3
    for k, layer in enumerate(critic.mlp):
        arrays[f"critic.mlp{k}.w"] = layer.w
        arrays[f"critic.mlp{k}.b"] = layer.b
    arrays["critic.head.w"] = critic.head.w
    arrays["critic.head.b"] = critic.head.b
    np.savez(path, **arrays)


def _collect_layers(data, prefix, builder):
    layers = []
    k = 0
    while any(key.startswith(f"{prefix}{k}.") for key in data.files):
        layers.append(builder(k))
        k += 1
    return layers


def load_policy(path):
    """Read a checkpoint written by save_policy; validates dimension chaining."""
    data = np.load(path)
    a_slope = float(data["meta.actor_slope"])
    c_slope = float(data["meta.critic_slope"])

    def gnn_layer(prefix, slope):
        def build(k):
            return GnnLayerParams(
                theta1=data[f"{prefix}{k}.theta1"],
                theta2=data[f"{prefix}{k}.theta2"],
                theta3=data[f"{prefix}{k}.theta3"],
                slope=slope,
            )

        return build

    def lin_layer(prefix):
        def build(k):
            return Linear(w=data[f"{prefix}{k}.w"], b=data[f"{prefix}{k}.b"])

        return build

    actor = ActorParams(
        gnn=_collect_layers(data, "actor.gnn", gnn_layer("actor.gnn", a_slope)),
        mlp=_collect_layers(data, "actor.mlp", lin_layer("actor.mlp")),
        mean_head=Linear(w=data["actor.mean_head.w"], b=data["actor.mean_head.b"]),
        std_head=Linear(w=data["actor.std_head.w"], b=data["actor.std_head.b"]),
        p_max=float(data["meta.p_max"]),
        slope=a_slope,
    )
    critic = CriticParams(
        gnn=_collect_layers(data, "critic.gnn", gnn_layer("critic.gnn", c_slope)),
        mlp=_collect_layers(data, "critic.mlp", lin_layer("critic.mlp")),
        head=Linear(w=data["critic.head.w"], b=data["critic.head.b"]),
        slope=c_slope,
    )
    for net in (actor, critic):
        chain = [l.theta1 for l in net.gnn] + [l.w for l in net.mlp]
        for a, b in zip(chain[:-1], chain[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeMismatch(f"checkpoint layer dims do not chain: {a.shape} -> {b.shape}")
    return actor, critic
