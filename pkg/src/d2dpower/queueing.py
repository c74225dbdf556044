"""Slotted FIFO queueing over the interference channel.

Each pair keeps a FIFO buffer of fixed-length packets. Per slot: new arrivals
join the buffer, the chosen powers fix the link rates, up to floor(T*rate/L)
packets depart, and the reward is the negative total backlog counted after
both arrivals and service of the slot. A packet's delay is its whole slots of
waiting plus the in-slot transmission time L/rate at departure.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelState, advance_fading, doppler_from_speed, link_capacity, make_fading
from .errors import DomainError, EmptyEpisode, ShapeMismatch
from .topology import NetworkTopology, PathLossConfig, gain_matrix, pair_distances


@dataclass
class EnvConfig:
    slot_seconds: float = 1e-3
    num_slots: int = 300
    arrival_rate_per_s: float = 3000.0  # per pair; 3 packets/ms
    packet_bits: float = 4000.0
    bandwidth_hz: float = 10e6
    noise_watts: float = 10.0 ** (-104.0 / 10.0) * 1e-3
    p_max_watts: float = 10.0 ** (10.0 / 10.0) * 1e-3

    def __post_init__(self):
        for name in ("slot_seconds", "arrival_rate_per_s", "packet_bits", "bandwidth_hz",
                     "noise_watts", "p_max_watts"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.num_slots < 1:
            raise DomainError("num_slots must be >= 1")

    @property
    def arrivals_mean(self) -> float:
        return self.arrival_rate_per_s * self.slot_seconds


@dataclass
class Packet:
    arrival_slot: int
    departure_slot: int | None = None
    transmit_fraction: float | None = None  # seconds spent on air in the departure slot

    def delay_seconds(self, slot_seconds: float) -> float:
        if self.departure_slot is None:
            raise DomainError("packet has not departed")
        return (self.departure_slot - self.arrival_slot) * slot_seconds + self.transmit_fraction


@dataclass
class BufferState:
    queues: list  # one deque[Packet] per pair, FIFO
    served_last: np.ndarray  # packets served in the most recent slot
    arrivals_last: np.ndarray  # packets that arrived in the most recent slot

    @property
    def backlog(self) -> np.ndarray:
        return np.array([len(q) for q in self.queues], dtype=int)

    @staticmethod
    def empty(m: int) -> "BufferState":
        return BufferState(
            queues=[deque() for _ in range(m)],
            served_last=np.zeros(m, dtype=int),
            arrivals_last=np.zeros(m, dtype=int),
        )


def sample_arrivals(rate_per_s: float, slot_seconds: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """Per-pair Poisson packet counts for one slot, mean rate*T."""
    if rate_per_s < 0 or slot_seconds <= 0:
        raise DomainError("need rate >= 0 and slot_seconds > 0")
    return rng.poisson(rate_per_s * slot_seconds, size=m)


def servable_packets(rates_bits_s: np.ndarray, slot_seconds: float, packet_bits: float) -> np.ndarray:
    """How many whole packets each link can push in one slot: floor(T*rate/L)."""
    return np.floor(np.asarray(rates_bits_s) * slot_seconds / packet_bits).astype(int)


@dataclass
class StepResult:
    buffers: BufferState
    reward: float
    served: np.ndarray
    departed_delays: list  # per pair, delays (seconds) of this slot's departures
    rates: np.ndarray  # achieved bits/s this slot
    done: bool


class D2DEnv:
    """The slotted power-control MDP for one fixed pair layout.

    Per episode the shadowing and fading realizations are redrawn (long-term
    fading holds within an episode); positions stay fixed for the lifetime of
    the env. Arrivals for a slot are enqueued before the slot's action is
    taken, so the featurizer sees them and they are servable in that slot.
    """

    def __init__(
        self,
        cfg: EnvConfig,
        topo: NetworkTopology,
        pathloss: PathLossConfig | None = None,
        shadowing_std_db: float = 7.0,
        speed_mps: float = 1.0,
        oscillators: int = 16,
        resample_shadowing: bool = True,
        seed=None,
        rng: np.random.Generator | None = None,
    ):
        self.cfg = cfg
        self.topo = topo
        self.pathloss = pathloss or PathLossConfig()
        self.shadowing_std_db = shadowing_std_db
        self.doppler_hz = doppler_from_speed(speed_mps, self.pathloss.carrier_hz)
        self.oscillators = oscillators
        self.resample_shadowing = resample_shadowing
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self._distances = pair_distances(topo.tx_xy, topo.rx_xy)
        self.slot = 0
        self.chan: ChannelState | None = None
        self.buffers: BufferState | None = None
        self.completed: list = []  # per pair, list of departed Packet
        self.total_arrivals = 0
        self.total_served = 0

    @property
    def m(self) -> int:
        return self.topo.m

    @property
    def done(self) -> bool:
        return self.slot >= self.cfg.num_slots

    def reset(self) -> BufferState:
        m = self.m
        if self.resample_shadowing:
            shadow = self.rng.normal(0.0, self.shadowing_std_db, size=(m, m))
            self._large = gain_matrix(self.topo.tx_xy, self.topo.rx_xy, shadow, self.pathloss)
        else:
            self._large = self.topo.large_scale
        self._fading = make_fading(
            m, self.doppler_hz, self.cfg.slot_seconds, self.oscillators, rng=self.rng
        )
        self.slot = 0
        self.buffers = BufferState.empty(m)
        self.completed = [[] for _ in range(m)]
        self.total_arrivals = 0
        self.total_served = 0
        self._set_channel(0)
        self._enqueue_arrivals(0)
        return self.buffers

    def _set_channel(self, slot: int):
        mag = advance_fading(self._fading, slot)
        self.chan = ChannelState(gain_sq=self._large * mag**2, slot=slot)

    def _enqueue_arrivals(self, slot: int):
        counts = sample_arrivals(self.cfg.arrival_rate_per_s, self.cfg.slot_seconds, self.m, self.rng)
        for i, k in enumerate(counts):
            for _ in range(k):
                self.buffers.queues[i].append(Packet(arrival_slot=slot))
        self.buffers.arrivals_last = counts
        self.total_arrivals += int(counts.sum())

    def step(self, powers_watts: np.ndarray) -> StepResult:
        if self.done:
            raise DomainError("episode is over; call reset()")
        n = self.slot
        cfg = self.cfg
        rates = link_capacity(self.chan, powers_watts, cfg.bandwidth_hz, cfg.noise_watts, cfg.p_max_watts)
        can_serve = servable_packets(rates, cfg.slot_seconds, cfg.packet_bits)

        served = np.zeros(self.m, dtype=int)
        departed = [[] for _ in range(self.m)]
        for i in range(self.m):
            q = self.buffers.queues[i]
            xi = min(int(can_serve[i]), len(q))
            for _ in range(xi):
                pkt = q.popleft()
                pkt.departure_slot = n
                pkt.transmit_fraction = cfg.packet_bits / rates[i]
                self.completed[i].append(pkt)
                departed[i].append(pkt.delay_seconds(cfg.slot_seconds))
            served[i] = xi
        self.buffers.served_last = served
        self.total_served += int(served.sum())

        # Backlog after this slot's arrivals (enqueued before the action) and service.
        reward = -float(self.buffers.backlog.sum())

        self.slot = n + 1
        done = self.done
        if not done:
            self._set_channel(self.slot)
            self._enqueue_arrivals(self.slot)
        return StepResult(
            buffers=self.buffers,
            reward=reward,
            served=served,
            departed_delays=departed,
            rates=rates,
            done=done,
        )

    def completed_delays(self) -> list:
        """Per pair, delays (seconds) of every departed packet so far."""
        return [
            [p.delay_seconds(self.cfg.slot_seconds) for p in pkts] for pkts in self.completed
        ]

    def censored_delays(self) -> list:
        """Per pair, waiting time (seconds) accrued by packets still queued."""
        return [
            [(self.cfg.num_slots - p.arrival_slot) * self.cfg.slot_seconds for p in q]
            for q in self.buffers.queues
        ]

    def head_of_line_wait(self) -> np.ndarray:
        """Whole-slot waiting age (seconds) of each pair's oldest queued packet."""
        out = np.zeros(self.m)
        for i, q in enumerate(self.buffers.queues):
            if q:
                out[i] = (self.slot - q[0].arrival_slot) * self.cfg.slot_seconds
        return out

    def packet_rows(self):
        """(pair, arrival_slot, departure_slot or -1, delay_ms or nan) per packet."""
        rows = []
        for i, pkts in enumerate(self.completed):
            for p in pkts:
                rows.append((i, p.arrival_slot, p.departure_slot, p.delay_seconds(self.cfg.slot_seconds) * 1e3))
        for i, q in enumerate(self.buffers.queues):
            for p in q:
                rows.append((i, p.arrival_slot, -1, float("nan")))
        rows.sort(key=lambda r: (r[1], r[0]))
        return rows


class RemainingPolicy(enum.Enum):
    """What to do with packets still queued when the episode ends."""

    EXCLUDE = "exclude"
    CENSORED = "censored"


def episode_average_delay(
    delays_per_pair: list,
    remaining: RemainingPolicy = RemainingPolicy.EXCLUDE,
    censored_per_pair: list | None = None,
) -> float:
    """Mean over pairs of each pair's mean packet delay (seconds).

    With EXCLUDE, pairs that completed nothing drop out of the pair mean;
    EmptyEpisode if that empties every pair. With CENSORED, leftover packets
    enter at their waiting time so far (censored_per_pair required).
    """
    if remaining is RemainingPolicy.CENSORED:
        if censored_per_pair is None:
            raise DomainError("CENSORED policy needs censored_per_pair")
        merged = [list(a) + list(b) for a, b in zip(delays_per_pair, censored_per_pair)]
    else:
        merged = [list(a) for a in delays_per_pair]
    per_pair = [float(np.mean(d)) for d in merged if len(d) > 0]
    if not per_pair:
        raise EmptyEpisode("no pair completed a packet and remaining policy excludes backlog")
    return float(np.mean(per_pair))
