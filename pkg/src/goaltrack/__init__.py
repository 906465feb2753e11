"""Goal-oriented UAV command-and-control simulation with a DQN repetition/velocity agent."""

from .agents import DQNAgent, PidConfig, TrainConfig, pid_command, select_action, train
from .channel import ChannelParams
from .env import Action, ActionSpace, EnvConfig, TrackingEnv, run_episodes
from .harness import ExperimentConfig, evaluate, load_config, sweep_threshold
from .repetition import RepetitionConfig, run_tti_transmission
from .world import ValueParams, distance, value

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionSpace",
    "ChannelParams",
    "DQNAgent",
    "EnvConfig",
    "ExperimentConfig",
    "PidConfig",
    "RepetitionConfig",
    "TrackingEnv",
    "TrainConfig",
    "ValueParams",
    "distance",
    "evaluate",
    "load_config",
    "pid_command",
    "run_episodes",
    "run_tti_transmission",
    "select_action",
    "sweep_threshold",
    "train",
    "value",
]
