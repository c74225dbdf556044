import math

import numpy as np
import pytest

from d2dpower.errors import DomainError, PlacementFailure
from d2dpower.topology import (
    NetworkTopology,
    PathLossConfig,
    free_space_reference_db,
    generate_topology,
    large_scale_gain,
    pair_distances,
    path_loss_db,
    topology_from_json,
    topology_to_json,
)


def test_reference_loss_at_2p4_ghz():
    # free-space anchor at 1 m: 20 log10(4 pi f / c)
    assert free_space_reference_db(2.4e9) == pytest.approx(40.0520080561155, abs=1e-9)


def test_path_loss_one_meter_equals_reference():
    cfg = PathLossConfig()
    assert path_loss_db(1.0, cfg) == pytest.approx(cfg.ref_loss_db, abs=1e-12)


def test_path_loss_continuous_at_breakpoint():
    cfg = PathLossConfig()
    below = path_loss_db(cfg.breakpoint_m * (1 - 1e-12), cfg)
    above = path_loss_db(cfg.breakpoint_m * (1 + 1e-12), cfg)
    assert abs(below - above) < 1e-6


def test_dual_slope_decade_beyond_breakpoint():
    # one decade past the breakpoint adds 10 * alpha2 dB, so the gain drops 1e4x
    cfg = PathLossConfig()
    g_near = large_scale_gain(cfg.breakpoint_m, 0.0, cfg)
    g_far = large_scale_gain(10 * cfg.breakpoint_m, 0.0, cfg)
    assert g_far / g_near == pytest.approx(1e-4, rel=1e-12)


def test_slopes_match_exponents():
    cfg = PathLossConfig()
    # below breakpoint: slope alpha1 per decade
    assert path_loss_db(50.0, cfg) - path_loss_db(5.0, cfg) == pytest.approx(10 * cfg.alpha1, abs=1e-9)
    # above: slope alpha2 per decade
    assert path_loss_db(5000.0, cfg) - path_loss_db(500.0, cfg) == pytest.approx(10 * cfg.alpha2, abs=1e-9)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(DomainError):
        path_loss_db(0.0, PathLossConfig())


def test_generate_topology_constraints_hold():
    topo = generate_topology(6, 500.0, seed=0)
    assert np.all(topo.tx_xy >= 0) and np.all(topo.tx_xy <= 500)
    # pairwise Tx spacing
    for i in range(6):
        for j in range(i + 1, 6):
            assert np.linalg.norm(topo.tx_xy[i] - topo.tx_xy[j]) >= 75.0
    # Tx-Rx annulus
    link = np.linalg.norm(topo.tx_xy - topo.rx_xy, axis=1)
    assert np.all(link >= 10.0 - 1e-9) and np.all(link <= 50.0 + 1e-9)
    assert topo.large_scale.shape == (6, 6)
    assert np.all(topo.large_scale > 0)


def test_generate_topology_deterministic_per_seed():
    a = generate_topology(6, 500.0, seed=42)
    b = generate_topology(6, 500.0, seed=42)
    assert np.array_equal(a.tx_xy, b.tx_xy)
    assert np.array_equal(a.rx_xy, b.rx_xy)
    assert np.array_equal(a.large_scale, b.large_scale)
    c = generate_topology(6, 500.0, seed=43)
    assert not np.array_equal(a.tx_xy, c.tx_xy)


def test_single_pair_and_dense_case():
    solo = generate_topology(1, 500.0, seed=1)
    assert solo.m == 1 and solo.large_scale.shape == (1, 1)
    dense = generate_topology(54, 1500.0, seed=1)
    assert dense.m == 54
    for i in range(54):
        for j in range(i + 1, 54):
            assert np.linalg.norm(dense.tx_xy[i] - dense.tx_xy[j]) >= 75.0


def test_placement_failure_when_area_too_small():
    # 30 transmitters with 75 m spacing cannot fit a 100 m square
    with pytest.raises(PlacementFailure):
        generate_topology(30, 100.0, seed=0)


def test_fixed_link_distance_allowed():
    # generalization scenario pins every Tx-Rx distance to one radius
    topo = generate_topology(4, 500.0, r_inner=30.0, r_outer=30.0, seed=3)
    link = np.linalg.norm(topo.tx_xy - topo.rx_xy, axis=1)
    assert np.allclose(link, 30.0, atol=1e-9)


def test_shadowing_std_matches_config():
    rng = np.random.default_rng(7)
    draws = rng.normal(0.0, 7.0, size=100_000)
    gains = large_scale_gain(50.0, draws, PathLossConfig())
    observed = np.std(-10.0 * np.log10(gains) - path_loss_db(50.0, PathLossConfig()))
    assert abs(observed - 7.0) / 7.0 < 0.02


def test_pair_distances_orientation():
    tx = np.array([[0.0, 0.0], [10.0, 0.0]])
    rx = np.array([[0.0, 3.0], [10.0, 4.0]])
    d = pair_distances(tx, rx)
    assert d[0, 0] == pytest.approx(3.0)
    assert d[1, 1] == pytest.approx(4.0)
    assert d[0, 1] == pytest.approx(np.hypot(10.0, 4.0))
    assert d[1, 0] == pytest.approx(np.hypot(10.0, 3.0))


def test_json_round_trip():
    topo = generate_topology(5, 500.0, seed=11)
    back = topology_from_json(topology_to_json(topo))
    assert isinstance(back, NetworkTopology)
    assert np.array_equal(back.tx_xy, topo.tx_xy)
    assert np.array_equal(back.rx_xy, topo.rx_xy)
    assert np.allclose(back.large_scale, topo.large_scale, rtol=1e-12)
    # a second pass through the dB representation is exact
    again = topology_from_json(topology_to_json(back))
    assert np.array_equal(again.large_scale, back.large_scale)
