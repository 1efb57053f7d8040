from .artifacts import ARTIFACT_VERSION, Artifacts, load_artifacts, save_artifacts
from .config import EnvSelection, RunConfig
from .evaluate import EvalReport, ExpertPolicy, RandomPolicy, compare, evaluate, write_comparison
from .run import make_env, run
from .surface import (RewardSurface, cyberphysical_surface, export_reward_surface, feeder_surface,
                      rerouting_surface)

__all__ = [
    "ARTIFACT_VERSION", "Artifacts", "EnvSelection", "EvalReport", "ExpertPolicy", "RandomPolicy",
    "RewardSurface", "RunConfig", "compare", "cyberphysical_surface", "evaluate", "export_reward_surface",
    "feeder_surface", "load_artifacts", "make_env", "rerouting_surface", "run", "save_artifacts",
    "write_comparison",
]
