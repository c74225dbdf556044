"""Small-scale fading and per-slot link capacities.

Fast fading is a sum-of-sinusoids Rayleigh process per directed link: each link
carries a bank of equal-amplitude complex oscillators with random Doppler
angles and phases, giving unit mean power and a Jakes-like autocorrelation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatch


def doppler_from_speed(speed_mps: float, carrier_hz: float) -> float:
    """Maximum Doppler shift v * f_c / c in Hz."""
    return speed_mps * carrier_hz / 299792458.0


@dataclass
class FadingProcess:
    amplitudes: np.ndarray  # (M, M, K), constant 1/sqrt(K)
    omegas: np.ndarray  # (M, M, K) rad/s, 2*pi*f_d*cos(angle)
    phases: np.ndarray  # (M, M, K) rad
    slot_seconds: float
    expected_slot: int = 0


def make_fading(
    m: int,
    doppler_hz: float,
    slot_seconds: float,
    oscillators: int = 16,
    rng: np.random.Generator | None = None,
    seed=None,
) -> FadingProcess:
    if m < 1 or oscillators < 1:
        raise DomainError("need m >= 1 and oscillators >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(m, m, oscillators))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(m, m, oscillators))
    amplitudes = np.full((m, m, oscillators), 1.0 / np.sqrt(oscillators))
    omegas = 2.0 * np.pi * doppler_hz * np.cos(angles)
    return FadingProcess(
        amplitudes=amplitudes, omegas=omegas, phases=phases, slot_seconds=slot_seconds
    )


def advance_fading(proc: FadingProcess, slot: int) -> np.ndarray:
    """Fading magnitude per link at the given slot index.

    Slots must be visited in order (0, 1, 2, ...), one call per slot.
    """
    if slot != proc.expected_slot:
        raise DomainError(f"fading advanced out of order: got slot {slot}, expected {proc.expected_slot}")
    t = slot * proc.slot_seconds
    arg = proc.omegas * t + proc.phases
    h = (proc.amplitudes * np.exp(1j * arg)).sum(axis=2)
    proc.expected_slot += 1
    return np.abs(h)


@dataclass
class ChannelState:
    """Squared channel magnitudes for one slot; [i, j] is Tx_i -> Rx_j."""

    gain_sq: np.ndarray  # (M, M), large-scale gain times |fading|^2
    slot: int

    @property
    def m(self) -> int:
        return self.gain_sq.shape[0]


def link_capacity(
    chan: ChannelState,
    powers: np.ndarray,
    bandwidth_hz: float,
    noise_watts: float,
    p_max_watts: float,
) -> np.ndarray:
    """Shannon rate per pair in bits/s, interference treated as noise."""
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (chan.m,):
        raise ShapeMismatch(f"powers shape {powers.shape} != ({chan.m},)")
    if noise_watts <= 0.0:
        raise DomainError("noise power must be positive")
    if not np.all(np.isfinite(chan.gain_sq)):
        raise DomainError("channel gains must be finite")
    if np.any(powers < 0.0) or np.any(powers > p_max_watts * (1.0 + 1e-9)):
        raise DomainError("powers must lie in [0, p_max]")
    direct = np.diag(chan.gain_sq)
    received = chan.gain_sq.T @ powers  # total power landing on each receiver
    interference = received - direct * powers
    sinr = direct * powers / (noise_watts + interference)
    return bandwidth_hz * np.log2(1.0 + sinr)


def sum_spectral_efficiency(gain_sq: np.ndarray, powers: np.ndarray, noise_watts: float) -> float:
    """Sum over links of log2(1 + SINR); no bandwidth factor."""
    direct = np.diag(gain_sq)
    interference = gain_sq.T @ powers - direct * powers
    sinr = direct * powers / (noise_watts + interference)
    return float(np.log2(1.0 + sinr).sum())
