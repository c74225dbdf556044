"""Experiment orchestration: training runs, evaluations, sweeps, scalability.

Evaluation draws an independent layout per seed, runs eval_episodes episodes
on it, and aggregates: the delay objective is averaged over episodes, the
percentiles pool every completed packet, and counts are per-episode means.
The policy is evaluated with its deterministic mean action; baselines see the
exact same channel and arrival realizations (env randomness never depends on
the chosen powers), so comparisons are paired.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .baselines import BaselineKind, itlinq, max_power, random_power, wmmse_history
from .config import ExperimentConfig
from .errors import DomainError, EmptyEpisode
from .graphfeat import featurize_env, init_tracker, update_avg_rate
from .metrics import MetricsReport, build_report
from .policy import (
    ActorParams,
    actor_forward_batch,
    init_actor,
    init_critic,
    load_policy,
    save_policy,
)
from .ppo import TrainResult, train
from .queueing import D2DEnv, RemainingPolicy, episode_average_delay
from .topology import generate_topology


def make_env(cfg: ExperimentConfig, seed: int, topo=None, resample_shadowing: bool = True) -> D2DEnv:
    """Build an env from the experiment config; topology drawn from seed if absent."""
    if topo is None:
        topo = generate_topology(
            cfg.num_pairs,
            cfg.area_side_m,
            cfg.min_tx_tx_m,
            cfg.tx_rx_min_m,
            cfg.tx_rx_max_m,
            seed=seed,
            pathloss=cfg.pathloss_config(),
            shadowing_std_db=cfg.shadowing_db,
        )
    return D2DEnv(
        cfg.env_config(),
        topo,
        pathloss=cfg.pathloss_config(),
        shadowing_std_db=cfg.shadowing_db,
        speed_mps=cfg.speed_mps,
        oscillators=cfg.sos_oscillators,
        resample_shadowing=resample_shadowing,
        seed=seed + 7919,  # env stream distinct from the layout draw
    )


def policy_power_fn(cfg: ExperimentConfig, actor: ActorParams):
    """Per-slot deterministic policy: actor mean, converted to watts."""
    state = {}

    def fn(env, episode_start: bool):
        if episode_start:
            state["tracker"] = init_tracker(
                env.chan, env.cfg.p_max_watts, env.cfg.noise_watts, cfg.ema_epsilon
            )
        sample = featurize_env(env, state["tracker"])
        mean, _, _ = actor_forward_batch(
            actor, sample.node_features[None, ...], sample.edge_weights[None, ...]
        )
        watts = mean[0] * (env.cfg.p_max_watts / actor.p_max)

        def after(result):
            state["tracker"] = update_avg_rate(
                state["tracker"], result.rates / env.cfg.bandwidth_hz
            )

        return watts, after

    return fn


def baseline_power_fn(cfg: ExperimentConfig, kind: BaselineKind, seed: int):
    rng = np.random.default_rng(seed + 104729)

    def fn(env, episode_start: bool):
        p_max = env.cfg.p_max_watts
        noise = env.cfg.noise_watts
        if kind is BaselineKind.MAX_POWER:
            watts = max_power(env.m, p_max)
        elif kind is BaselineKind.RANDOM_POWER:
            watts = random_power(env.m, p_max, rng)
        elif kind is BaselineKind.WMMSE:
            watts, _, _ = wmmse_history(env.chan, p_max, noise, cfg.wmmse_max_iters, cfg.wmmse_tol)
        elif kind is BaselineKind.ITLINQ:
            watts = itlinq(env.chan, p_max, noise, 10.0 ** (cfg.itlinq_m_db / 10.0), cfg.itlinq_eta)
        else:
            raise DomainError(f"unhandled baseline {kind}")
        return watts, None

    return fn


@dataclass
class EvalOutcome:
    report: MetricsReport
    packet_rows: list  # (seed, episode, pair, arrival_slot, departure_slot, delay_ms)
    power_rows: list  # (seed, episode, slot, *powers_watts)


def run_episodes(
    cfg: ExperimentConfig,
    power_fn,
    seeds,
    episodes: int,
    topo=None,
    resample_shadowing: bool = True,
) -> EvalOutcome:
    """Evaluation core shared by policies and baselines.

    With topo given, all seeds reuse that fixed layout (paired comparisons on
    one network); otherwise each seed draws its own topology. Passing
    resample_shadowing=False freezes the large-scale gains at the topology's
    own draw, so episodes differ only in fading and traffic.
    """
    episode_delays, pooled, returns = [], [], []
    transmitted = remaining = 0
    rate_sums = np.zeros(cfg.num_pairs)
    rate_slots = 0
    packet_rows, power_rows = [], []
    for seed in seeds:
        env = make_env(cfg, seed, topo=topo, resample_shadowing=resample_shadowing)
        for ep in range(episodes):
            env.reset()
            ep_return = 0.0
            episode_start = True
            while not env.done:
                slot = env.slot
                watts, after = power_fn(env, episode_start)
                episode_start = False
                result = env.step(watts)
                if after is not None:
                    after(result)
                ep_return += result.reward
                rate_sums += result.rates
                rate_slots += 1
                power_rows.append((seed, ep, slot, *np.asarray(watts, dtype=float)))
            delays = env.completed_delays()
            try:
                episode_delays.append(
                    episode_average_delay(delays, cfg.remaining,
                                          env.censored_delays() if cfg.remaining
                                          is RemainingPolicy.CENSORED else None) * 1e3
                )
            except EmptyEpisode:
                episode_delays.append(float("nan"))
            pooled.extend(d * 1e3 for pair in delays for d in pair)
            transmitted += env.total_served
            remaining += env.total_arrivals - env.total_served
            returns.append(ep_return)
            for row in env.packet_rows():
                packet_rows.append((seed, ep, *row))
    n_episodes = len(seeds) * episodes
    report = build_report(
        pairs=cfg.num_pairs,
        episode_delays_ms=episode_delays,
        pooled_delays_ms=pooled,
        transmitted_total=transmitted,
        remaining_total=remaining,
        episodes=n_episodes,
        per_pair_rate_mbps=rate_sums / max(rate_slots, 1) / 1e6,
        episode_returns=returns,
    )
    return EvalOutcome(report=report, packet_rows=packet_rows, power_rows=power_rows)


def eval_seeds_list(cfg: ExperimentConfig) -> list:
    return [cfg.seed + k for k in range(cfg.eval_seeds)]


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_outcome(out_dir, cfg: ExperimentConfig, outcome: EvalOutcome, mode: str, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        fh.write(outcome.report.to_json(mode=mode, **(extra or {})))
    _write_csv(
        os.path.join(out_dir, "packets.csv"),
        ["seed", "episode", "pair", "arrival_slot", "departure_slot", "delay_ms"],
        outcome.packet_rows,
    )
    m = cfg.num_pairs
    _write_csv(
        os.path.join(out_dir, "powers.csv"),
        ["seed", "episode", "slot", *[f"p{i}_watts" for i in range(m)]],
        outcome.power_rows,
    )


def write_training_curve(out_dir, result: TrainResult):
    rows = []
    for ep, (ret, delay) in enumerate(zip(result.episode_returns, result.episode_delays_ms)):
        rnd = result.episode_update_round[ep]
        a_loss = result.actor_losses[rnd] if 0 <= rnd < len(result.actor_losses) else ""
        c_loss = result.critic_losses[rnd] if 0 <= rnd < len(result.critic_losses) else ""
        rows.append((ep, ret, delay if not math.isnan(delay) else "", a_loss, c_loss))
    _write_csv(
        os.path.join(out_dir, "training_curve.csv"),
        ["episode", "return", "avg_delay_ms", "actor_loss", "critic_loss"],
        rows,
    )


def run_experiment(
    cfg: ExperimentConfig,
    mode: str,
    out_dir,
    checkpoint=None,
    seed: int | None = None,
) -> MetricsReport:
    """Top-level entry used by the CLI. Modes: train, eval-policy, eval-baseline."""
    seed = cfg.seed if seed is None else seed
    os.makedirs(out_dir, exist_ok=True)
    if mode == "train":
        rng = np.random.default_rng(seed)
        actor = init_actor(rng, cfg.actor_p_max_mw, 4, cfg.gnn_dims, cfg.mlp_dims)
        critic = init_critic(rng, 4, cfg.gnn_dims, cfg.mlp_dims)
        env = make_env(cfg, seed)
        result = train(env, actor, critic, cfg.train_config(seed))
        ckpt_path = os.path.join(out_dir, "checkpoint.npz")
        save_policy(ckpt_path, actor, critic)
        write_training_curve(out_dir, result)
        outcome = run_episodes(cfg, policy_power_fn(cfg, actor), eval_seeds_list(cfg), cfg.eval_episodes)
        write_outcome(out_dir, cfg, outcome, mode, extra={"checkpoint": str(ckpt_path)})
        return outcome.report
    if mode == "eval-policy":
        if checkpoint is None:
            raise DomainError("eval-policy needs a checkpoint path")
        actor, _ = load_policy(checkpoint)
        outcome = run_episodes(cfg, policy_power_fn(cfg, actor), eval_seeds_list(cfg), cfg.eval_episodes)
        write_outcome(out_dir, cfg, outcome, mode)
        return outcome.report
    if mode == "eval-baseline":
        kind = BaselineKind.from_name(cfg.baseline)
        outcome = run_episodes(
            cfg, baseline_power_fn(cfg, kind, seed), eval_seeds_list(cfg), cfg.eval_episodes
        )
        write_outcome(out_dir, cfg, outcome, mode, extra={"baseline": cfg.baseline})
        return outcome.report
    raise DomainError(f"unknown mode '{mode}' (train, eval-policy, eval-baseline)")


def scalability_eval(
    actor_or_checkpoint,
    base_cfg: ExperimentConfig,
    scenarios: list,
    episodes: int | None = None,
) -> list:
    """Evaluate one trained actor across layouts of different size, no retraining.

    scenarios: dicts that override layout fields, e.g.
    {"num_pairs": 24, "area_side_m": 1000}. Returns one row per scenario with
    the delay mean/std over eval seeds' episodes.
    """
    if isinstance(actor_or_checkpoint, ActorParams):
        actor = actor_or_checkpoint
    else:
        actor, _ = load_policy(actor_or_checkpoint)
    rows = []
    for scenario in scenarios:
        cfg = ExperimentConfig(**{**_cfg_dict(base_cfg), **scenario})
        outcome = run_episodes(
            cfg,
            policy_power_fn(cfg, actor),
            eval_seeds_list(cfg),
            episodes or cfg.eval_episodes,
        )
        rows.append(
            {
                "scenario": dict(scenario),
                "num_pairs": cfg.num_pairs,
                "area_side_m": cfg.area_side_m,
                "average_delay_ms": outcome.report.average_delay_ms,
                "delay_std_ms": outcome.report.delay_std_ms,
                "transmitted_per_episode": outcome.report.transmitted_per_episode,
                "remaining_per_episode": outcome.report.remaining_per_episode,
            }
        )
    return rows


def _cfg_dict(cfg: ExperimentConfig) -> dict:
    from dataclasses import asdict

    return asdict(cfg)
