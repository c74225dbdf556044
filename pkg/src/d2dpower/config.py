"""Experiment configuration: a flat key = value file with units in the names.

Field names carry their units (ms, dBm, MHz, ...) so a config file reads
unambiguously; all conversions to SI happen here, in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError
from .ppo import TrainConfig
from .queueing import EnvConfig, RemainingPolicy
from .topology import PathLossConfig
from .units import dbm_to_watts


@dataclass
class ExperimentConfig:
    # layout
    num_pairs: int = 6
    area_side_m: float = 500.0
    min_tx_tx_m: float = 75.0
    tx_rx_min_m: float = 10.0
    tx_rx_max_m: float = 50.0
    # radio
    bandwidth_mhz: float = 10.0
    noise_dbm: float = -104.0
    p_max_dbm: float = 10.0
    carrier_ghz: float = 2.4
    speed_mps: float = 1.0
    shadowing_db: float = 7.0
    pl_alpha1: float = 2.0
    pl_alpha2: float = 4.0
    pl_breakpoint_m: float = 100.0
    sos_oscillators: int = 16
    # traffic
    slot_ms: float = 1.0
    num_slots: int = 300
    arrivals_per_ms: float = 3.0
    packet_bits: float = 4000.0
    # agent architecture
    gnn_layers: int = 2
    gnn_dim: int = 64
    mlp_hidden: str = "500,250,120"
    ema_epsilon: float = 0.01
    # training
    episodes: int = 800
    episodes_per_update: int = 2
    update_epochs: int = 10
    clip_eps: float = 0.2
    discount: float = 0.99
    gae_lambda: float = 0.95
    learning_rate: float = 1e-3
    grad_clip: float = 0.5
    critic_target: str = "discounted"
    reward_scaling: bool = True
    advantage_norm: bool = True
    # baselines
    baseline: str = "max-power"
    wmmse_max_iters: int = 100
    wmmse_tol: float = 1e-6
    itlinq_m_db: float = 10.0
    itlinq_eta: float = 0.6
    # evaluation
    eval_episodes: int = 5
    eval_seeds: int = 5
    remaining_policy: str = "exclude"
    seed: int = 1

    # ---- derived views ----

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            slot_seconds=self.slot_ms * 1e-3,
            num_slots=self.num_slots,
            arrival_rate_per_s=self.arrivals_per_ms * 1e3,
            packet_bits=self.packet_bits,
            bandwidth_hz=self.bandwidth_mhz * 1e6,
            noise_watts=dbm_to_watts(self.noise_dbm),
            p_max_watts=dbm_to_watts(self.p_max_dbm),
        )

    def pathloss_config(self) -> PathLossConfig:
        return PathLossConfig(
            alpha1=self.pl_alpha1,
            alpha2=self.pl_alpha2,
            breakpoint_m=self.pl_breakpoint_m,
            carrier_hz=self.carrier_ghz * 1e9,
        )

    def train_config(self, seed: int | None = None) -> TrainConfig:
        return TrainConfig(
            episodes=self.episodes,
            episodes_per_update=self.episodes_per_update,
            update_epochs=self.update_epochs,
            clip_eps=self.clip_eps,
            discount=self.discount,
            gae_lambda=self.gae_lambda,
            learning_rate=self.learning_rate,
            grad_clip=self.grad_clip,
            critic_target=self.critic_target,
            reward_scaling=self.reward_scaling,
            advantage_norm=self.advantage_norm,
            ema_epsilon=self.ema_epsilon,
            seed=self.seed if seed is None else seed,
        )

    @property
    def mlp_dims(self) -> tuple:
        try:
            return tuple(int(x) for x in self.mlp_hidden.split(","))
        except ValueError as exc:
            raise ConfigError(f"mlp_hidden must be comma-separated ints: {self.mlp_hidden!r}") from exc

    @property
    def gnn_dims(self) -> tuple:
        return (self.gnn_dim,) * self.gnn_layers

    @property
    def actor_p_max_mw(self) -> float:
        # The actor works in milliwatts; 10 dBm -> 10 mW.
        return 10.0 ** (self.p_max_dbm / 10.0)

    @property
    def remaining(self) -> RemainingPolicy:
        return RemainingPolicy(self.remaining_policy)


def config_to_file(cfg: ExperimentConfig, path):
    lines = ["# d2dpower experiment configuration", ""]
    for f in fields(cfg):
        lines.append(f"{f.name} = {getattr(cfg, f.name)!r}" if f.type == "str"
                     else f"{f.name} = {getattr(cfg, f.name)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _coerce(name: str, raw: str, target_type, line_no: int):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"line {line_no}: field '{name}' wants a bool, got {raw!r}")
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"line {line_no}: field '{name}' wants {target_type.__name__}, got {raw!r}")
    # strings may be quoted
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    return raw


def config_from_file(path) -> ExperimentConfig:
    """Parse key = value lines; '#' starts a comment; unknown keys are errors."""
    type_map = {"int": int, "float": float, "bool": bool, "str": str}
    field_types = {f.name: type_map[f.type] for f in fields(ExperimentConfig)}
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"line {line_no}: expected 'key = value', got {line.rstrip()!r}")
            key, raw = text.split("=", 1)
            key = key.strip()
            if key not in field_types:
                raise ConfigError(f"line {line_no}: unknown field '{key}'")
            values[key] = _coerce(key, raw, field_types[key], line_no)
    return ExperimentConfig(**values)
