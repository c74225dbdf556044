"""Device-to-device pair placement and large-scale (distance + shadowing) gains.

Transmitters are dropped uniformly in a square with a minimum mutual spacing,
each receiver uniformly in an annulus around its transmitter. Large-scale gain
is a dual-slope log-distance path loss plus i.i.d. log-normal shadowing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PlacementFailure
from .units import SPEED_OF_LIGHT

MAX_PLACEMENT_ATTEMPTS = 1_000_000


def free_space_reference_db(carrier_hz: float) -> float:
    """Free-space path loss at 1 m for the given carrier, in dB."""
    return 20.0 * math.log10(4.0 * math.pi * carrier_hz / SPEED_OF_LIGHT)


@dataclass
class PathLossConfig:
    """Dual-slope path loss: exponent alpha1 out to the breakpoint, alpha2 beyond."""

    alpha1: float = 2.0
    alpha2: float = 4.0
    breakpoint_m: float = 100.0
    carrier_hz: float = 2.4e9
    ref_loss_db: float = field(default=math.nan)

    def __post_init__(self):
        if math.isnan(self.ref_loss_db):
            self.ref_loss_db = free_space_reference_db(self.carrier_hz)


def path_loss_db(distance_m, cfg: PathLossConfig):
    """Path loss in dB at the given distance(s). Continuous at the breakpoint."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0.0):
        raise DomainError("path loss undefined for non-positive distance")
    near = cfg.ref_loss_db + 10.0 * cfg.alpha1 * np.log10(d)
    far = (
        cfg.ref_loss_db
        + 10.0 * cfg.alpha1 * np.log10(cfg.breakpoint_m)
        + 10.0 * cfg.alpha2 * np.log10(d / cfg.breakpoint_m)
    )
    out = np.where(d <= cfg.breakpoint_m, near, far)
    return out if out.ndim else float(out)


def large_scale_gain(distance_m, shadowing_db, cfg: PathLossConfig):
    """Linear power gain for a link: 10^(-(PL(d) + shadow)/10)."""
    pl = path_loss_db(distance_m, cfg)
    return 10.0 ** (-(np.asarray(pl) + np.asarray(shadowing_db, dtype=float)) / 10.0)


def pair_distances(tx_xy: np.ndarray, rx_xy: np.ndarray) -> np.ndarray:
    """dist[i, j] = distance from transmitter i to receiver j, in meters."""
    diff = tx_xy[:, None, :] - rx_xy[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def gain_matrix(
    tx_xy: np.ndarray,
    rx_xy: np.ndarray,
    shadowing_db: np.ndarray,
    cfg: PathLossConfig,
) -> np.ndarray:
    """M x M linear gains, entry [i, j] for the Tx_i -> Rx_j link."""
    return large_scale_gain(pair_distances(tx_xy, rx_xy), shadowing_db, cfg)


@dataclass
class NetworkTopology:
    area_side: float
    tx_xy: np.ndarray  # (M, 2) meters
    rx_xy: np.ndarray  # (M, 2) meters
    large_scale: np.ndarray  # (M, M) linear gain, [i, j] = Tx_i -> Rx_j

    @property
    def m(self) -> int:
        return self.tx_xy.shape[0]

    @property
    def pairs(self):
        return list(zip(self.tx_xy, self.rx_xy))


def generate_topology(
    m: int,
    area_side: float,
    min_tx_dist: float = 75.0,
    r_inner: float = 10.0,
    r_outer: float = 50.0,
    seed=None,
    pathloss: PathLossConfig | None = None,
    shadowing_std_db: float = 7.0,
    rng: np.random.Generator | None = None,
) -> NetworkTopology:
    """Drop m pairs in an area_side x area_side square.

    Transmitters are rejection-sampled to keep mutual distance >= min_tx_dist;
    each receiver lands uniformly (by area) in the [r_inner, r_outer] annulus
    around its transmitter. Raises PlacementFailure after 1e6 rejected draws.
    """
    if m < 1:
        raise DomainError("need at least one pair")
    if not (0.0 <= r_inner <= r_outer):
        raise DomainError("need 0 <= r_inner <= r_outer")
    if rng is None:
        rng = np.random.default_rng(seed)
    pathloss = pathloss or PathLossConfig()

    tx = np.empty((m, 2))
    placed = 0
    attempts = 0
    while placed < m:
        candidate = rng.uniform(0.0, area_side, size=2)
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise PlacementFailure(
                f"could not place {m} transmitters with spacing {min_tx_dist} m "
                f"in a {area_side} m square after {attempts - 1} attempts"
            )
        if placed and np.min(np.linalg.norm(tx[:placed] - candidate, axis=1)) < min_tx_dist:
            continue
        tx[placed] = candidate
        placed += 1

    # Uniform over the annulus area: r^2 uniform on [r_inner^2, r_outer^2].
    radii = np.sqrt(rng.uniform(r_inner**2, r_outer**2, size=m))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=m)
    rx = tx + radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])

    shadow = rng.normal(0.0, shadowing_std_db, size=(m, m))
    gains = gain_matrix(tx, rx, shadow, pathloss)
    return NetworkTopology(area_side=float(area_side), tx_xy=tx, rx_xy=rx, large_scale=gains)


def topology_to_json(topo: NetworkTopology) -> str:
    """Serialize positions (meters) and gains (dB)."""
    payload = {
        "area_side_m": topo.area_side,
        "tx_xy_m": topo.tx_xy.tolist(),
        "rx_xy_m": topo.rx_xy.tolist(),
        "large_scale_db": (10.0 * np.log10(topo.large_scale)).tolist(),
    }
    return json.dumps(payload, indent=2)


def topology_from_json(text: str) -> NetworkTopology:
    payload = json.loads(text)
    return NetworkTopology(
        area_side=float(payload["area_side_m"]),
        tx_xy=np.asarray(payload["tx_xy_m"], dtype=float),
        rx_xy=np.asarray(payload["rx_xy_m"], dtype=float),
        large_scale=10.0 ** (np.asarray(payload["large_scale_db"], dtype=float) / 10.0),
    )
