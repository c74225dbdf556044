"""Per-slot graph construction: node features and normalized edge weights.

Node features per pair: proportional-fairness ratio (full-power rate estimate
over an exponentially averaged achieved rate), head-of-line waiting age,
backlog, and packets served last slot; the latter three L2-normalized across
pairs. Edge weights are log full-power SNRs normalized to unit Frobenius norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelState
from .errors import DomainError, ShapeMismatch


@dataclass
class RateTracker:
    """Exponential moving average of each pair's achieved spectral efficiency."""

    avg: np.ndarray  # (M,)
    epsilon: float = 0.01


def full_power_estimate(chan: ChannelState, p_max_watts: float, noise_watts: float) -> np.ndarray:
    """Spectral efficiency (bits/s/Hz) each pair would see with everyone at P_max."""
    g = chan.gain_sq
    direct = np.diag(g)
    interference = g.T.sum(axis=1) - direct  # sum of cross gains into each receiver
    sinr = direct * p_max_watts / (noise_watts + interference * p_max_watts)
    return np.log2(1.0 + sinr)


def init_tracker(
    chan: ChannelState, p_max_watts: float, noise_watts: float, epsilon: float = 0.01
) -> RateTracker:
    """Start the average at the full-power estimate so the PF ratio opens at 1."""
    return RateTracker(avg=full_power_estimate(chan, p_max_watts, noise_watts), epsilon=epsilon)


def update_avg_rate(tracker: RateTracker, achieved: np.ndarray) -> RateTracker:
    """New tracker with avg <- (1 - eps) * avg + eps * achieved."""
    achieved = np.asarray(achieved, dtype=float)
    if achieved.shape != tracker.avg.shape:
        raise ShapeMismatch("achieved rate vector has the wrong length")
    eps = tracker.epsilon
    return RateTracker(avg=(1.0 - eps) * tracker.avg + eps * achieved, epsilon=eps)


def pf_ratio(
    chan: ChannelState, tracker: RateTracker, p_max_watts: float, noise_watts: float
) -> np.ndarray:
    if np.any(tracker.avg <= 0.0):
        raise DomainError("average rate must be positive for the PF ratio")
    return full_power_estimate(chan, p_max_watts, noise_watts) / tracker.avg


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||_2, with the all-zero vector mapped to itself."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return np.zeros_like(v)
    return v / norm


def edge_features(chan: ChannelState, p_max_watts: float, noise_watts: float) -> np.ndarray:
    """M x M matrix of log full-power SNRs, unit Frobenius norm.

    The normalization sums every entry including the diagonal; the returned
    matrix still carries its diagonal (callers drop it for message passing).
    """
    g = chan.gain_sq
    if np.any(g <= 0.0):
        raise DomainError("edge features need strictly positive gains")
    logs = np.log(p_max_watts * g / noise_watts)
    denom = np.sqrt((logs**2).sum())
    if denom == 0.0:
        raise DomainError("all-zero log-SNR matrix cannot be normalized")
    return logs / denom


@dataclass
class GraphSample:
    node_features: np.ndarray  # (M, 4): [pf ratio, hol wait, backlog, served], last 3 L2-normalized
    edge_weights: np.ndarray  # (M, M), zero diagonal

    @property
    def m(self) -> int:
        return self.node_features.shape[0]


def build_graph_sample(
    chan: ChannelState,
    tracker: RateTracker,
    hol_wait_s: np.ndarray,
    backlog: np.ndarray,
    served_last: np.ndarray,
    p_max_watts: float,
    noise_watts: float,
) -> GraphSample:
    omega = pf_ratio(chan, tracker, p_max_watts, noise_watts)
    nodes = np.column_stack(
        [
            omega,
            l2_normalize(hol_wait_s),
            l2_normalize(np.asarray(backlog, dtype=float)),
            l2_normalize(np.asarray(served_last, dtype=float)),
        ]
    )
    edges = edge_features(chan, p_max_watts, noise_watts).copy()
    np.fill_diagonal(edges, 0.0)
    return GraphSample(node_features=nodes, edge_weights=edges)


def featurize_env(env, tracker: RateTracker) -> GraphSample:
    """GraphSample for the env's current slot (arrivals already enqueued)."""
    return build_graph_sample(
        env.chan,
        tracker,
        env.head_of_line_wait(),
        env.buffers.backlog,
        env.buffers.served_last,
        env.cfg.p_max_watts,
        env.cfg.noise_watts,
    )
