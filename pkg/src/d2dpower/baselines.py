"""Per-slot power-control baselines: fixed, random, WMMSE, ITLinQ, grid oracle.

All of these are pure functions of one slot's channel matrix, so an episode
baseline is just the per-slot map applied to each ChannelState in turn.
"""

from __future__ import annotations

import enum
import warnings

import numpy as np

from .channel import ChannelState, sum_spectral_efficiency
from .errors import BudgetExceeded, DomainError, NonConvergenceWarning


class BaselineKind(enum.Enum):
    MAX_POWER = "max-power"
    RANDOM_POWER = "random-power"
    WMMSE = "wmmse"
    ITLINQ = "itlinq"

    @staticmethod
    def from_name(name: str) -> "BaselineKind":
        for kind in BaselineKind:
            if kind.value == name:
                return kind
        raise DomainError(f"unknown baseline '{name}' (choose from "
                          f"{[k.value for k in BaselineKind]})")


def max_power(m: int, p_max: float) -> np.ndarray:
    return np.full(m, float(p_max))


def random_power(m: int, p_max: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, p_max, size=m)


def wmmse_history(
    chan: ChannelState,
    p_max: float,
    noise: float,
    max_iters: int = 100,
    tol: float = 1e-6,
):
    """Scalar-channel WMMSE for sum rate with unit weights.

    Amplitudes v start at full power; each iteration updates receiver gains u,
    MSE weights w, then v (clipped to [0, sqrt(p_max)]). Returns
    (powers, sum_rate_per_iteration, converged) where index 0 of the history
    is the initial point.
    """
    g = chan.gain_sq
    if np.any(g <= 0.0) or noise <= 0.0:
        raise DomainError("WMMSE needs strictly positive gains and noise")
    m = chan.m
    h = np.sqrt(np.diag(g))
    v = np.full(m, np.sqrt(p_max))
    history = [sum_spectral_efficiency(g, v**2, noise)]
    converged = False
    for _ in range(max_iters):
        v_prev = v.copy()
        u = h * v / (noise + g.T @ v**2)  # receive gain; denominator sums all arrivals
        w = 1.0 / (1.0 - u * h * v)  # MSE weight, equals 1 + SINR
        v = np.clip(w * u * h / (g @ (w * u**2)), 0.0, np.sqrt(p_max))
        history.append(sum_spectral_efficiency(g, v**2, noise))
        if np.max(np.abs(v - v_prev)) < tol:
            converged = True
            break
    return v**2, history, converged


def wmmse(
    chan: ChannelState,
    p_max: float,
    noise: float,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> np.ndarray:
    powers, _, converged = wmmse_history(chan, p_max, noise, max_iters, tol)
    if not converged:
        warnings.warn(
            f"WMMSE stopped at {max_iters} iterations above tol {tol}",
            NonConvergenceWarning,
        )
    return powers


def itlinq(
    chan: ChannelState,
    p_max: float,
    noise: float,
    m_const: float = 10.0**2.5,  # 25 dB
    eta: float = 0.7,
) -> np.ndarray:
    """Greedy link activation: strongest SNR first, admit a link if its SNR
    beats m_const times (worst INR against the active set)^eta. Active links
    transmit at p_max, the rest stay silent."""
    g = chan.gain_sq
    snr = p_max * np.diag(g) / noise
    order = np.argsort(-snr, kind="stable")
    active: list = []
    for i in order:
        if active:
            inr_in = max(p_max * g[j, i] / noise for j in active)
            inr_out = max(p_max * g[i, j] / noise for j in active)
            if snr[i] < m_const * max(inr_in, inr_out) ** eta:
                continue
        active.append(int(i))
    powers = np.zeros(chan.m)
    powers[active] = p_max
    return powers


def exhaustive_oracle(trace, p_max: float, noise: float, grid_points: int = 50):
    """Grid search of [0, p_max]^M for the max instantaneous sum rate.

    trace may be a single ChannelState (returns (M,)) or a sequence of them
    (returns (T, M)). Guarded to M <= 3; the grid grows as grid_points^M.
    """
    single = isinstance(trace, ChannelState)
    chans = [trace] if single else list(trace)
    m = chans[0].m
    if m > 3:
        raise BudgetExceeded(f"exhaustive search limited to 3 pairs, got {m}")
    if grid_points < 2:
        raise DomainError("grid needs at least 2 points")
    axis = np.linspace(0.0, p_max, grid_points)
    combos = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)

    results = []
    for chan in chans:
        g = chan.gain_sq
        direct = np.diag(g)
        cross = g.copy()
        np.fill_diagonal(cross, 0.0)
        interference = combos @ cross  # (C, M); entry [c, i] = sum_j != i G[j, i] p_j
        sinr = direct * combos / (noise + interference)
        objective = np.log2(1.0 + sinr).sum(axis=1)
        results.append(combos[int(np.argmax(objective))])
    return results[0] if single else np.stack(results)
