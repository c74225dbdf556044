"""Delay statistics and the evaluation report container."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyInput


def percentile_delay(delays, q: float) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value."""
    values = np.sort(np.asarray(list(delays), dtype=float))
    if values.size == 0:
        raise EmptyInput("percentile of an empty delay set")
    if not (0.0 < q <= 100.0):
        raise EmptyInput(f"percentile q must be in (0, 100], got {q}")
    rank = math.ceil(q / 100.0 * values.size)
    return float(values[rank - 1])


@dataclass
class MetricsReport:
    """Aggregated evaluation numbers; delays in ms, rates in Mb/s.

    Counts are per-episode means so they stay comparable across runs with
    different episode budgets. average_delay_ms is None when no pair
    completed a packet anywhere (the delay objective is then undefined).
    """

    pairs: int
    episodes: int
    average_delay_ms: float | None
    delay_std_ms: float | None  # std over per-episode delay objectives
    p5_delay_ms: float | None  # pooled over all completed packets
    p95_delay_ms: float | None
    transmitted_per_episode: float
    remaining_per_episode: float
    per_pair_rate_mbps: list
    episode_returns: list = field(default_factory=list)

    def to_json(self, **extra) -> str:
        payload = asdict(self)
        payload.update(extra)
        return json.dumps(payload, indent=2, allow_nan=False, default=_jsonify)


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def build_report(
    pairs: int,
    episode_delays_ms: list,
    pooled_delays_ms: list,
    transmitted_total: int,
    remaining_total: int,
    episodes: int,
    per_pair_rate_mbps,
    episode_returns: list,
) -> MetricsReport:
    """Assemble a MetricsReport; undefined statistics become None."""
    finite = [d for d in episode_delays_ms if not math.isnan(d)]
    if finite:
        avg = float(np.mean(finite))
        std = float(np.std(finite))
    else:
        avg = std = None
    if pooled_delays_ms:
        p5 = percentile_delay(pooled_delays_ms, 5.0)
        p95 = percentile_delay(pooled_delays_ms, 95.0)
    else:
        p5 = p95 = None
    return MetricsReport(
        pairs=pairs,
        episodes=episodes,
        average_delay_ms=avg,
        delay_std_ms=std,
        p5_delay_ms=p5,
        p95_delay_ms=p95,
        transmitted_per_episode=transmitted_total / episodes,
        remaining_per_episode=remaining_total / episodes,
        per_pair_rate_mbps=list(np.asarray(per_pair_rate_mbps, dtype=float)),
        episode_returns=episode_returns,
    )
