"""Clipped-surrogate PPO with GAE over rollout episodes.

One update round consumes episodes_per_update full episodes: rewards are
scaled by a running std, advantages come from GAE(lambda) with a terminal
bootstrap of zero, and both networks then take update_epochs full-batch Adam
steps. The actor maximizes E[min(r A, clip(r, 1 - eps, 1 + eps) A)]; the
critic minimizes the mean squared TD error (discounted target by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceDetected, DomainError, LengthMismatch, EmptyEpisode
from .graphfeat import featurize_env, init_tracker, update_avg_rate
from .nncore import Adam
from .policy import (
    ActorParams,
    CriticParams,
    actor_backward_batch,
    actor_forward_batch,
    actor_param_arrays,
    critic_backward_batch,
    critic_forward_batch,
    critic_param_arrays,
    gaussian_log_prob,
    sample_action,
)
from .queueing import episode_average_delay


@dataclass
class TrainConfig:
    episodes: int = 800
    episodes_per_update: int = 2
    update_epochs: int = 10
    clip_eps: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 1e-3
    grad_clip: float = 0.5
    critic_target: str = "discounted"  # or "undiscounted" (no discount on V(s'))
    reward_scaling: bool = True
    advantage_norm: bool = True
    ema_epsilon: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.critic_target not in ("discounted", "undiscounted"):
            raise DomainError("critic_target must be 'discounted' or 'undiscounted'")


def compute_gae(rewards: np.ndarray, values: np.ndarray, discount: float, lam: float) -> np.ndarray:
    """Advantages A_t = sum_l (discount*lam)^l delta_{t+l} via the reverse recursion.

    values must hold one trailing bootstrap entry (0 for terminal states).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rewards.shape[0] + 1:
        raise LengthMismatch("need len(values) == len(rewards) + 1 (bootstrap appended)")
    t_len = rewards.shape[0]
    adv = np.zeros(t_len)
    running = 0.0
    for t in range(t_len - 1, -1, -1):
        delta = rewards[t] + discount * values[t + 1] - values[t]
        running = delta + discount * lam * running
        adv[t] = running
    return adv


def actor_loss(
    advantages: np.ndarray,
    old_log_probs: np.ndarray,
    new_log_probs: np.ndarray,
    clip_eps: float,
) -> float:
    """Mean clipped surrogate objective (to be maximized)."""
    ratio = np.exp(np.asarray(new_log_probs) - np.asarray(old_log_probs))
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    return float(np.minimum(surr1, surr2).mean())


def actor_loss_grad_logp(
    advantages: np.ndarray,
    old_log_probs: np.ndarray,
    new_log_probs: np.ndarray,
    clip_eps: float,
) -> np.ndarray:
    """d(objective)/d(new_log_prob) per transition; zero where the clip binds."""
    ratio = np.exp(np.asarray(new_log_probs) - np.asarray(old_log_probs))
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    active = surr1 <= surr2  # min picks the unclipped branch
    return np.where(active, ratio * advantages, 0.0) / advantages.shape[0]


def critic_loss(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: np.ndarray,
    discount: float,
    critic_target: str = "discounted",
) -> float:
    """Mean squared TD error; 'undiscounted' drops the discount on V(s')."""
    gamma = discount if critic_target == "discounted" else 1.0
    td = np.asarray(rewards) + gamma * np.asarray(next_values) - np.asarray(values)
    return float((td**2).mean())


class RunningStd:
    """Welford accumulator for the reward scale."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, xs: np.ndarray):
        for x in np.asarray(xs, dtype=float).ravel():
            self.count += 1
            delta = x - self.mean
            self.mean += delta / self.count
            self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        if self.count < 2:
            return 1.0
        return float(np.sqrt(self.m2 / self.count))


@dataclass
class TrainResult:
    actor: ActorParams
    critic: CriticParams
    episode_returns: list
    episode_delays_ms: list  # nan where no pair completed a packet
    actor_losses: list  # one entry per update round
    critic_losses: list
    episode_update_round: list  # which update round an episode fed (-1 if none yet)


def _rollout(env, actor: ActorParams, cfg: TrainConfig, rng: np.random.Generator):
    """One episode; returns stacked arrays and the raw return/delay."""
    env.reset()
    tracker = init_tracker(
        env.chan, env.cfg.p_max_watts, env.cfg.noise_watts, cfg.ema_epsilon
    )
    unit = env.cfg.p_max_watts / actor.p_max  # actor units -> watts
    feats, edges, raws, logps, rewards = [], [], [], [], []
    while not env.done:
        sample = featurize_env(env, tracker)
        mean, std, _ = actor_forward_batch(
            actor, sample.node_features[None, ...], sample.edge_weights[None, ...]
        )
        action = sample_action(mean[0], std[0], rng, actor.p_max)
        result = env.step(action.clipped * unit)
        tracker = update_avg_rate(tracker, result.rates / env.cfg.bandwidth_hz)
        feats.append(sample.node_features)
        edges.append(sample.edge_weights)
        raws.append(action.raw)
        logps.append(action.log_prob)
        rewards.append(result.reward)
    try:
        delay_ms = episode_average_delay(env.completed_delays()) * 1e3
    except EmptyEpisode:
        delay_ms = float("nan")
    return (
        np.stack(feats),
        np.stack(edges),
        np.stack(raws),
        np.array(logps),
        np.array(rewards),
        delay_ms,
    )


def _update(actor, critic, opt_a, opt_c, episodes, cfg: TrainConfig, reward_stat: RunningStd):
    """One PPO update round over the buffered episodes; returns final losses."""
    y = np.concatenate([e[0] for e in episodes])
    edges = np.concatenate([e[1] for e in episodes])
    raws = np.concatenate([e[2] for e in episodes])
    old_logp = np.concatenate([e[3] for e in episodes])
    rewards_raw = np.concatenate([e[4] for e in episodes])
    ep_len = episodes[0][4].shape[0]
    n = rewards_raw.shape[0]

    if cfg.reward_scaling:
        reward_stat.update(rewards_raw)
        rewards = rewards_raw / (reward_stat.std + 1e-8)
    else:
        rewards = rewards_raw

    # Advantages from the pre-update critic, one GAE pass per episode.
    values0, _ = critic_forward_batch(critic, y, edges)
    adv = np.empty(n)
    for k in range(len(episodes)):
        lo, hi = k * ep_len, (k + 1) * ep_len
        adv[lo:hi] = compute_gae(
            rewards[lo:hi], np.append(values0[lo:hi], 0.0), cfg.discount, cfg.gae_lambda
        )
    if cfg.advantage_norm:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    a_arrays = actor_param_arrays(actor)
    c_arrays = critic_param_arrays(critic)
    a_loss = c_loss = float("nan")
    for _ in range(cfg.update_epochs):
        mean, std, a_cache = actor_forward_batch(actor, y, edges)
        new_logp = gaussian_log_prob(raws, mean, std)
        a_loss = actor_loss(adv, old_logp, new_logp, cfg.clip_eps)
        dlogp = -actor_loss_grad_logp(adv, old_logp, new_logp, cfg.clip_eps)  # minimize -objective
        z = raws - mean
        dmean = dlogp[:, None] * z / std**2
        dstd = dlogp[:, None] * (z**2 - std**2) / std**3
        a_grads, _ = actor_backward_batch(actor, a_cache, dmean, dstd)
        opt_a.step(a_arrays, a_grads)

        values, c_cache = critic_forward_batch(critic, y, edges)
        v_next = values.reshape(len(episodes), ep_len).copy()
        v_next[:, :-1] = v_next[:, 1:]
        v_next[:, -1] = 0.0  # terminal bootstrap
        v_next = v_next.ravel()
        gamma = cfg.discount if cfg.critic_target == "discounted" else 1.0
        target = rewards + gamma * v_next  # held fixed: semi-gradient TD
        c_loss = float(((target - values) ** 2).mean())
        dv = -2.0 * (target - values) / n
        c_grads, _ = critic_backward_batch(critic, c_cache, dv)
        opt_c.step(c_arrays, c_grads)

        if not (np.isfinite(a_loss) and np.isfinite(c_loss)):
            raise DivergenceDetected(
                f"non-finite loss (actor={a_loss}, critic={c_loss}); "
                f"reward scale {reward_stat.std:.3g}, |adv| max {np.abs(adv).max():.3g}"
            )
    return a_loss, c_loss


def train(env, actor: ActorParams, critic: CriticParams, cfg: TrainConfig) -> TrainResult:
    """Run the full training loop; mutates actor/critic in place and logs per episode."""
    if callable(env):
        env = env()
    rng = np.random.default_rng(cfg.seed)
    opt_a = Adam([a.shape for a in actor_param_arrays(actor)], lr=cfg.learning_rate,
                 clip_norm=cfg.grad_clip)
    opt_c = Adam([a.shape for a in critic_param_arrays(critic)], lr=cfg.learning_rate,
                 clip_norm=cfg.grad_clip)
    reward_stat = RunningStd()

    returns, delays, a_losses, c_losses, rounds = [], [], [], [], []
    buffer = []
    round_idx = 0
    for ep in range(cfg.episodes):
        rollout = _rollout(env, actor, cfg, rng)
        buffer.append(rollout)
        returns.append(float(rollout[4].sum()))
        delays.append(rollout[5])
        rounds.append(-1)
        if len(buffer) == cfg.episodes_per_update:
            if cfg.update_epochs > 0:
                a_loss, c_loss = _update(actor, critic, opt_a, opt_c, buffer, cfg, reward_stat)
                a_losses.append(a_loss)
                c_losses.append(c_loss)
            for k in range(cfg.episodes_per_update):
                rounds[ep - k] = round_idx
            round_idx += 1
            buffer = []  # rollout memory is spent once the epochs consume it
    return TrainResult(
        actor=actor,
        critic=critic,
        episode_returns=returns,
        episode_delays_ms=delays,
        actor_losses=a_losses,
        critic_losses=c_losses,
        episode_update_round=rounds,
    )
