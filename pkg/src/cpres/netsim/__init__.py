from .env import CyberGoalSpec, NetConfig, NetSimEnv
from .network import Network, WindowStats, build_network
from .topology import AttackSpec, TopologySpec, load_topology

__all__ = [
    "AttackSpec",
    "CyberGoalSpec",
    "NetConfig",
    "NetSimEnv",
    "Network",
    "TopologySpec",
    "WindowStats",
    "build_network",
    "load_topology",
]
