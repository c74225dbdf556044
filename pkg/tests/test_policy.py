import math

import numpy as np
import pytest

from d2dpower.errors import ShapeMismatch
from d2dpower.graphfeat import GraphSample
from d2dpower.policy import (
    STD_FLOOR,
    actor_backward_batch,
    actor_forward,
    actor_forward_batch,
    actor_param_arrays,
    critic_backward_batch,
    critic_forward,
    critic_forward_batch,
    critic_param_arrays,
    gaussian_log_prob,
    init_actor,
    init_critic,
    load_policy,
    sample_action,
    save_policy,
)

P_MAX = 10.0  # policy works in mW


def small_actor(seed, p_max=P_MAX):
    rng = np.random.default_rng(seed)
    return init_actor(rng, p_max, feature_dim=3, gnn_dims=(4,), hidden=(5,))


def small_critic(seed):
    rng = np.random.default_rng(seed)
    return init_critic(rng, feature_dim=3, gnn_dims=(4,), hidden=(5,))


def random_inputs(seed, b=2, m=3, f=3):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=(b, m, f))
    e = rng.normal(size=(b, m, m))
    idx = np.arange(m)
    e[:, idx, idx] = 0.0
    return y, e


def test_mean_head_squashing():
    actor = small_actor(0)
    y, e = random_inputs(1)
    actor.mean_head.w[:] = 0.0
    # zero pre-activation puts the mean at the middle of the power range
    actor.mean_head.b[:] = 0.0
    mean, _, _ = actor_forward_batch(actor, y, e)
    assert np.allclose(mean, P_MAX / 2.0)
    actor.mean_head.b[:] = 40.0  # tanh saturates at +1
    mean, _, _ = actor_forward_batch(actor, y, e)
    assert np.allclose(mean, P_MAX)
    actor.mean_head.b[:] = -40.0
    mean, _, _ = actor_forward_batch(actor, y, e)
    assert np.allclose(mean, 0.0, atol=1e-12)


def test_std_head_squashing():
    actor = small_actor(2)
    y, e = random_inputs(3)
    actor.std_head.w[:] = 0.0
    actor.std_head.b[:] = 0.0
    _, std, _ = actor_forward_batch(actor, y, e)
    assert np.allclose(std, math.log(2.0) + STD_FLOOR)  # softplus(0) + floor
    actor.std_head.b[:] = -50.0
    _, std, _ = actor_forward_batch(actor, y, e)
    assert np.allclose(std, STD_FLOOR)


def test_outputs_within_bounds():
    actor = small_actor(4)
    y, e = random_inputs(5, b=8, m=6)
    mean, std, _ = actor_forward_batch(actor, y, e)
    assert np.all(mean >= 0.0) and np.all(mean <= P_MAX)
    assert np.all(std >= STD_FLOOR)


def test_gaussian_log_prob_values():
    # standard normal at its mean: -0.5 log(2 pi)
    lp = gaussian_log_prob(np.array([0.0]), np.array([0.0]), np.array([1.0]))
    assert lp == pytest.approx(-0.9189385332046727, rel=1e-12)
    # independent dims add
    lp2 = gaussian_log_prob(np.zeros(2), np.zeros(2), np.ones(2))
    assert lp2 == pytest.approx(2 * -0.9189385332046727, rel=1e-12)
    # general case against the explicit density
    x, mu, sd = 1.3, 0.4, 0.7
    expected = -0.5 * ((x - mu) / sd) ** 2 - math.log(sd) - 0.5 * math.log(2 * math.pi)
    lp3 = gaussian_log_prob(np.array([x]), np.array([mu]), np.array([sd]))
    assert lp3 == pytest.approx(expected, rel=1e-12)


def test_sample_action_statistics_and_clipping():
    rng = np.random.default_rng(6)
    m = 20000
    mean = np.full(m, 2.0)
    std = np.full(m, 1.5)
    act = sample_action(mean, std, rng, p_max=P_MAX)
    assert act.raw.mean() == pytest.approx(2.0, abs=0.05)
    assert act.raw.std() == pytest.approx(1.5, abs=0.05)
    assert np.all(act.clipped >= 0.0) and np.all(act.clipped <= P_MAX)
    assert np.any(act.raw < 0.0)  # clipping genuinely engaged
    assert np.all(act.clipped[act.raw < 0.0] == 0.0)
    # log prob is evaluated at the unclipped draw
    assert act.log_prob == pytest.approx(float(gaussian_log_prob(act.raw, mean, std)))


def test_actor_permutation_equivariance():
    actor = small_actor(7)
    rng = np.random.default_rng(8)
    m = 5
    nodes = rng.normal(size=(m, 3))
    e = rng.normal(size=(m, m))
    np.fill_diagonal(e, 0.0)
    mean, std = actor_forward(actor, GraphSample(nodes, e))
    perm = rng.permutation(m)
    mean_p, std_p = actor_forward(actor, GraphSample(nodes[perm], e[np.ix_(perm, perm)]))
    assert np.max(np.abs(mean_p - mean[perm])) < 1e-9
    assert np.max(np.abs(std_p - std[perm])) < 1e-9


def test_critic_permutation_invariance():
    critic = small_critic(9)
    rng = np.random.default_rng(10)
    m = 6
    nodes = rng.normal(size=(m, 3))
    e = rng.normal(size=(m, m))
    np.fill_diagonal(e, 0.0)
    v = critic_forward(critic, GraphSample(nodes, e))
    perm = rng.permutation(m)
    v_p = critic_forward(critic, GraphSample(nodes[perm], e[np.ix_(perm, perm)]))
    assert v_p == pytest.approx(v, abs=1e-9)


def _kink_margin_actor(cache):
    gnn_min = min(np.min(np.abs(z)) for _, _, z in cache.gnn_cache.per_layer)
    mlp_min = min(np.min(np.abs(c[1])) for c in cache.mlp_caches)
    return min(gnn_min, mlp_min)


def _kink_margin_critic(cache):
    gnn_min = min(np.min(np.abs(z)) for _, _, z in cache.gnn_cache.per_layer)
    mlp_min = min(np.min(np.abs(c[1])) for c in cache.mlp_caches)
    return min(gnn_min, mlp_min)


def _rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-3, np.abs(a) + np.abs(b)))


def _fd_check(arrays, grads, loss, h=1e-6, tol=1e-5):
    for arr, grad in zip(arrays, grads):
        fd = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            up = loss()
            arr[idx] = orig - h
            down = loss()
            arr[idx] = orig
            fd[idx] = (up - down) / (2 * h)
        assert _rel_err(grad, fd) < tol


def test_actor_gradients_match_fd():
    actor = None
    for seed in range(50):
        cand = small_actor(100 + seed)
        y, e = random_inputs(200 + seed, b=2, m=3)
        _, _, cache = actor_forward_batch(cand, y, e)
        if _kink_margin_actor(cache) > 1e-3:
            actor = cand
            break
    assert actor is not None, "no kink-safe actor found"

    rng = np.random.default_rng(11)
    mean, std, cache = actor_forward_batch(actor, y, e)
    wm = rng.normal(size=mean.shape)
    ws = rng.normal(size=std.shape)
    grads, dy = actor_backward_batch(actor, cache, wm, ws)

    def loss():
        m_, s_, _ = actor_forward_batch(actor, y, e)
        return float(np.sum(m_ * wm) + np.sum(s_ * ws))

    _fd_check(actor_param_arrays(actor), grads, loss)

    h = 1e-6
    fd_y = np.zeros_like(y)
    for idx in np.ndindex(y.shape):
        orig = y[idx]
        y[idx] = orig + h
        up = loss()
        y[idx] = orig - h
        down = loss()
        y[idx] = orig
        fd_y[idx] = (up - down) / (2 * h)
    assert _rel_err(dy, fd_y) < 1e-5


def test_critic_gradients_match_fd():
    critic = None
    for seed in range(50):
        cand = small_critic(300 + seed)
        y, e = random_inputs(400 + seed, b=2, m=3)
        _, cache = critic_forward_batch(cand, y, e)
        if _kink_margin_critic(cache) > 1e-3:
            critic = cand
            break
    assert critic is not None, "no kink-safe critic found"

    rng = np.random.default_rng(12)
    v, cache = critic_forward_batch(critic, y, e)
    w = rng.normal(size=v.shape)
    grads, _ = critic_backward_batch(critic, cache, w)

    def loss():
        v_, _ = critic_forward_batch(critic, y, e)
        return float(np.sum(v_ * w))

    _fd_check(critic_param_arrays(critic), grads, loss)


def test_param_arrays_are_live_views():
    actor = small_actor(13)
    arrays = actor_param_arrays(actor)
    assert arrays[0] is actor.gnn[0].theta1
    assert arrays[-1] is actor.std_head.b
    critic = small_critic(14)
    c_arrays = critic_param_arrays(critic)
    assert c_arrays[-2] is critic.head.w


def test_checkpoint_round_trip(tmp_path):
    actor = small_actor(15)
    critic = small_critic(16)
    path = tmp_path / "policy.npz"
    save_policy(path, actor, critic)
    actor2, critic2 = load_policy(path)
    assert actor2.p_max == actor.p_max
    y, e = random_inputs(17)
    m1, s1, _ = actor_forward_batch(actor, y, e)
    m2, s2, _ = actor_forward_batch(actor2, y, e)
    assert np.array_equal(m1, m2)
    assert np.array_equal(s1, s2)
    v1, _ = critic_forward_batch(critic, y, e)
    v2, _ = critic_forward_batch(critic2, y, e)
    assert np.array_equal(v1, v2)


def test_checkpoint_rejects_broken_dims(tmp_path):
    actor = small_actor(18)
    critic = small_critic(19)
    actor.mlp[0].w = np.zeros((7, 5))  # no longer chains with the 4-dim GNN output
    path = tmp_path / "bad.npz"
    save_policy(path, actor, critic)
    with pytest.raises(ShapeMismatch):
        load_policy(path)
