"""Unit conversions, kept in one place so no module hand-rolls its own dB math."""

import math

SPEED_OF_LIGHT = 299792458.0


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def watts_to_dbm(watts: float) -> float:
    if watts <= 0.0:
        raise ValueError("watts must be positive for a dBm value")
    return 10.0 * math.log10(watts * 1e3)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0.0:
        raise ValueError("linear value must be positive for a dB value")
    return 10.0 * math.log10(x)
