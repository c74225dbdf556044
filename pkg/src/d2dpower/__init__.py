"""Delay-aware power control for D2D networks: simulator, GNN-PPO agent, baselines."""

from .baselines import BaselineKind, exhaustive_oracle, itlinq, max_power, random_power, wmmse
from .channel import ChannelState, FadingProcess, advance_fading, link_capacity, make_fading
from .config import ExperimentConfig, config_from_file, config_to_file
from .errors import (
    BudgetExceeded,
    ConfigError,
    DivergenceDetected,
    DomainError,
    EmptyEpisode,
    EmptyInput,
    LengthMismatch,
    NonConvergenceWarning,
    PlacementFailure,
    ShapeMismatch,
    SimulationError,
    StaleCache,
)
from .gnn import GnnLayerParams, NodeEmbeddings, gnn_backward, gnn_forward, init_gnn
from .graphfeat import (
    GraphSample,
    RateTracker,
    build_graph_sample,
    edge_features,
    featurize_env,
    init_tracker,
    l2_normalize,
    pf_ratio,
    update_avg_rate,
)
from .metrics import MetricsReport, percentile_delay
from .policy import (
    ActorParams,
    CriticParams,
    PowerAction,
    actor_forward,
    critic_forward,
    init_actor,
    init_critic,
    load_policy,
    sample_action,
    save_policy,
)
from .ppo import TrainConfig, TrainResult, actor_loss, compute_gae, critic_loss, train
from .queueing import (
    BufferState,
    D2DEnv,
    EnvConfig,
    Packet,
    RemainingPolicy,
    episode_average_delay,
    sample_arrivals,
    servable_packets,
)
from .runner import make_env, run_episodes, run_experiment, scalability_eval
from .topology import (
    NetworkTopology,
    PathLossConfig,
    generate_topology,
    large_scale_gain,
    topology_from_json,
    topology_to_json,
)

__version__ = "0.1.0"
