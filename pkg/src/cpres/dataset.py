"""Trajectory containers and the newline-delimited JSON dataset format.

The first line of a dataset file is a header::

    {"type": "header", "version": "1.0", "env_spec_hash": ..., "env": {...},
     "episodes": [{"episode_id": 0, "seed": ..., "length": ..., "return": ...,
                   "failed": false, "error": null}, ...]}

followed by one record per transition::

    {"obs": [...], "act": 3, "next_obs": [...], "done": false, "reward": 1.0, "episode_id": 0}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError

DATASET_VERSION = "1.0"


@dataclass
class Trajectory:
    obs: np.ndarray          # (T, obs_dim)
    acts: np.ndarray         # (T,)
    next_obs: np.ndarray     # (T, obs_dim)
    rewards: np.ndarray      # (T,)
    dones: np.ndarray        # (T,)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.acts)

    @property
    def ret(self) -> float:
        return float(np.sum(self.rewards))

    @classmethod
    def from_steps(cls, steps, obs_dim: int, meta=None) -> "Trajectory":
        if not steps:
            empty = np.zeros((0, obs_dim))
            return cls(empty, np.zeros(0, dtype=np.int64), empty.copy(), np.zeros(0), np.zeros(0, dtype=bool),
                       dict(meta or {}))
        obs, acts, nxt, rew, done = zip(*steps)
        return cls(np.asarray(obs, dtype=float), np.asarray(acts, dtype=np.int64), np.asarray(nxt, dtype=float),
                   np.asarray(rew, dtype=float), np.asarray(done, dtype=bool), dict(meta or {}))


class TrajectoryDataset:
    def __init__(self, trajectories=None, env_spec_hash: str = "", env: dict | None = None):
        self.trajectories: list[Trajectory] = list(trajectories or [])
        self.env_spec_hash = env_spec_hash
        self.env = dict(env or {})

    def __len__(self):
        return len(self.trajectories)

    def __eq__(self, other):
        if not isinstance(other, TrajectoryDataset) or len(self) != len(other):
            return False
        if self.env_spec_hash != other.env_spec_hash:
            return False
        for a, b in zip(self.trajectories, other.trajectories):
            if a.meta != b.meta:
                return False
            for name in ("obs", "acts", "next_obs", "rewards", "dones"):
                if not np.array_equal(getattr(a, name), getattr(b, name)):
                    return False
        return True

    def add(self, traj: Trajectory):
        self.trajectories.append(traj)

    def usable(self, include_failed: bool = False) -> list[Trajectory]:
        return [t for t in self.trajectories if include_failed or not t.meta.get("failed")]

    @property
    def transition_count(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def arrays(self, include_failed: bool = False):
        """Stacked ``(obs, acts, next_obs, dones)`` over usable trajectories."""
        trajs = [t for t in self.usable(include_failed) if len(t)]
        if not trajs:
            return np.zeros((0, 0)), np.zeros(0, dtype=np.int64), np.zeros((0, 0)), np.zeros(0, dtype=bool)
        return (np.concatenate([t.obs for t in trajs]), np.concatenate([t.acts for t in trajs]),
                np.concatenate([t.next_obs for t in trajs]), np.concatenate([t.dones for t in trajs]))

    def mean_length(self, include_failed: bool = False) -> float:
        trajs = self.usable(include_failed)
        return float(np.mean([len(t) for t in trajs])) if trajs else float("nan")

    # ---- serialization -----------------------------------------------------
    def to_lines(self) -> list[str]:
        episodes = []
        for i, t in enumerate(self.trajectories):
            m = dict(t.meta)
            m.setdefault("episode_id", i)
            m["length"] = len(t)
            m["return"] = t.ret
            episodes.append(m)
        header = {"type": "header", "version": DATASET_VERSION, "env_spec_hash": self.env_spec_hash,
                  "env": self.env, "episodes": episodes}
        lines = [json.dumps(header, sort_keys=True)]
        for i, t in enumerate(self.trajectories):
            eid = t.meta.get("episode_id", i)
            for k in range(len(t)):
                rec = {"obs": t.obs[k].tolist(), "act": int(t.acts[k]), "next_obs": t.next_obs[k].tolist(),
                       "done": bool(t.dones[k]), "reward": float(t.rewards[k]), "episode_id": eid}
                lines.append(json.dumps(rec, sort_keys=True))
        return lines

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text("\n".join(self.to_lines()) + "\n")
        tmp.replace(path)
        return path

    @classmethod
    def load(cls, path, expect_hash: str | None = None) -> "TrajectoryDataset":
        return cls.from_lines(Path(path).read_text().splitlines(), expect_hash, str(path))

    @classmethod
    def from_lines(cls, lines, expect_hash: str | None = None, path: str = "<dataset>") -> "TrajectoryDataset":
        if not lines:
            raise SchemaError(f"{path}: empty dataset file")
        header = json.loads(lines[0])
        if header.get("type") != "header":
            raise SchemaError(f"{path}: first record must be the header")
        if int(str(header.get("version", "0")).split(".")[0]) != int(DATASET_VERSION.split(".")[0]):
            raise SchemaError(f"{path}: unsupported dataset version {header.get('version')}")
        if expect_hash is not None and header.get("env_spec_hash") != expect_hash:
            raise SchemaError(f"{path}: dataset was recorded on a different environment")
        by_episode: dict = {}
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            by_episode.setdefault(rec["episode_id"], []).append(
                (rec["obs"], rec["act"], rec["next_obs"], rec["reward"], rec["done"]))
        obs_dim = int(header.get("env", {}).get("obs_dim", 0))
        trajs = []
        for m in header["episodes"]:
            meta = {k: v for k, v in m.items() if k not in ("length", "return")}
            steps = by_episode.get(m["episode_id"], [])
            dim = obs_dim or (len(steps[0][0]) if steps else 0)
            trajs.append(Trajectory.from_steps(steps, dim, meta))
        return cls(trajs, header.get("env_spec_hash", ""), header.get("env"))
