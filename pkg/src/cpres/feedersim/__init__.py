from .env import FeederConfig, FeederEnv, effective_contingencies, step_reward
from .model import Contingency, FeederModel, LoadProfile, load_feeder
from .powerflow import check_radiality, count_unrestored, solve_power_flow

__all__ = [
    "Contingency",
    "FeederConfig",
    "FeederEnv",
    "FeederModel",
    "LoadProfile",
    "check_radiality",
    "count_unrestored",
    "effective_contingencies",
    "load_feeder",
    "solve_power_flow",
    "step_reward",
]
