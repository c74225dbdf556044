"""Command-line front end: train, eval, sweep, scalability."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .baselines import BaselineKind
from .config import ExperimentConfig, config_from_file, config_to_file
from .errors import SimulationError
from .runner import (
    baseline_power_fn,
    eval_seeds_list,
    policy_power_fn,
    run_episodes,
    run_experiment,
    scalability_eval,
    write_outcome,
)


def _load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return config_from_file(path)


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    if args.episodes is not None:
        cfg.episodes = args.episodes
    report = run_experiment(cfg, "train", args.out, seed=args.seed)
    config_to_file(cfg, os.path.join(args.out, "config.txt"))
    print(report.to_json(mode="train"))
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    if args.baseline is not None:
        cfg.baseline = args.baseline
        report = run_experiment(cfg, "eval-baseline", args.out, seed=args.seed)
    else:
        if args.checkpoint is None:
            print("eval needs --checkpoint or --baseline", file=sys.stderr)
            return 2
        report = run_experiment(cfg, "eval-policy", args.out, checkpoint=args.checkpoint,
                                seed=args.seed)
    print(report.to_json(mode="eval"))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [type(getattr(cfg, args.param))(v) for v in args.values.split(",")]
    rows = []
    os.makedirs(args.out, exist_ok=True)
    for value in values:
        setattr(cfg, args.param, value)
        if args.checkpoint is not None:
            from .policy import load_policy

            actor, _ = load_policy(args.checkpoint)
            outcome = run_episodes(cfg, policy_power_fn(cfg, actor),
                                   eval_seeds_list(cfg), cfg.eval_episodes)
        else:
            kind = BaselineKind.from_name(cfg.baseline)
            outcome = run_episodes(cfg, baseline_power_fn(cfg, kind, cfg.seed),
                                   eval_seeds_list(cfg), cfg.eval_episodes)
        rows.append({args.param: value,
                     "average_delay_ms": outcome.report.average_delay_ms,
                     "delay_std_ms": outcome.report.delay_std_ms,
                     "transmitted_per_episode": outcome.report.transmitted_per_episode,
                     "remaining_per_episode": outcome.report.remaining_per_episode})
    out_path = os.path.join(args.out, "sweep.json")
    with open(out_path, "w") as fh:
        json.dump(rows, fh, indent=2)
    print(json.dumps(rows, indent=2))
    return 0


def _parse_scenarios(text: str) -> list:
    """'12:700;24:1000;6:500:30:30' -> scenario override dicts."""
    scenarios = []
    for chunk in text.split(";"):
        parts = chunk.strip().split(":")
        scenario = {"num_pairs": int(parts[0]), "area_side_m": float(parts[1])}
        if len(parts) >= 4:
            scenario["tx_rx_min_m"] = float(parts[2])
            scenario["tx_rx_max_m"] = float(parts[3])
        scenarios.append(scenario)
    return scenarios


def _cmd_scalability(args) -> int:
    cfg = _load_config(args.config)
    scenarios = _parse_scenarios(args.scenarios)
    rows = scalability_eval(args.checkpoint, cfg, scenarios, episodes=args.episodes)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "scalability.json"), "w") as fh:
        json.dump(rows, fh, indent=2)
    print(json.dumps(rows, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2dpower",
        description="D2D power control: queueing simulator, GNN-PPO agent, baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the GNN policy, then evaluate it")
    p_train.add_argument("--config", default=None, help="key = value config file")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--episodes", type=int, default=None, help="override config episodes")
    p_train.set_defaults(fn=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint or a baseline")
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--baseline", default=None,
                        choices=[k.value for k in BaselineKind])
    p_eval.set_defaults(fn=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="evaluate while sweeping one config field")
    p_sweep.add_argument("--config", default=None)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--param", required=True, help="config field to sweep")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--checkpoint", default=None)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_scal = sub.add_parser("scalability", help="evaluate one checkpoint across layouts")
    p_scal.add_argument("--config", default=None)
    p_scal.add_argument("--out", required=True)
    p_scal.add_argument("--checkpoint", required=True)
    p_scal.add_argument("--episodes", type=int, default=None)
    p_scal.add_argument(
        "--scenarios",
        default="12:700;24:1000;54:1500",
        help="semicolon list of m:area[:rmin:rmax]",
    )
    p_scal.set_defaults(fn=_cmd_scalability)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
