"""Experiment configuration."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

from ..errors import ConfigError
from ..feedersim.model import PRESETS as FEEDER_PRESETS
from ..netsim.topology import PRESETS as TOPOLOGY_PRESETS

ALGORITHMS = ("random", "expert", "ppo", "bc", "dagger", "gail", "airl")
ENV_KINDS = ("netsim", "feedersim", "cpenv")


@dataclass(frozen=True)
class EnvSelection:
    kind: str = "netsim"
    topology: str = "N8"          # preset name or JSON path
    feeder: str = "f13"           # preset name or JSON path
    max_steps: int | None = None

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class RunConfig:
    env: EnvSelection = EnvSelection()
    algorithm: str = "bc"
    budget: int = 10_000
    seeds: tuple[int, ...] = (0,)
    expert_episodes: int = 300           # demonstrations for gail/airl
    expert_source: str | None = None     # existing dataset file instead of collecting
    eval_episodes: int = 100
    hyper: dict = field(default_factory=dict)
    out_dir: str = "runs/default"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_overrides(self, seed=None, budget=None, out=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seeds=(int(seed),))
        if budget is not None:
            cfg = replace(cfg, budget=int(budget))
        if out is not None:
            cfg = replace(cfg, out_dir=str(out))
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        if self.env.kind not in ENV_KINDS:
            raise ConfigError("env.kind", f"must be one of {ENV_KINDS}, got {self.env.kind!r}")
        if self.env.kind in ("netsim", "cpenv") and self.env.topology.upper() not in TOPOLOGY_PRESETS:
            if not Path(self.env.topology).is_file():
                raise ConfigError("env.topology", f"no such file: {self.env.topology}")
        if self.env.kind in ("feedersim", "cpenv") and self.env.feeder.upper() not in FEEDER_PRESETS:
            if not Path(self.env.feeder).is_file():
                raise ConfigError("env.feeder", f"no such file: {self.env.feeder}")
        if self.env.max_steps is not None and self.env.max_steps < 1:
            raise ConfigError("env.max_steps", "must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if int(self.budget) < 1:
            raise ConfigError("budget", "must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds", "must be non-empty")
        if self.expert_episodes < 1:
            raise ConfigError("expert_episodes", "must be >= 1")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes", "must be >= 1")
        if self.expert_source is not None and not Path(self.expert_source).is_file():
            raise ConfigError("expert_source", f"no such file: {self.expert_source}")
        if not isinstance(self.hyper, dict):
            raise ConfigError("hyper", "must be a mapping")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        d = dict(d)
        env = d.pop("env", {})
        if not isinstance(env, dict):
            raise ConfigError("env", "must be an object")
        env_known = set(EnvSelection.__dataclass_fields__)
        if set(env) - env_known:
            raise ConfigError("env." + sorted(set(env) - env_known)[0], "unknown field")
        seeds = d.pop("seeds", [0])
        if isinstance(seeds, int):
            seeds = [seeds]
        try:
            cfg = cls(env=EnvSelection(**env), seeds=tuple(int(s) for s in seeds), **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError("<root>", str(exc)) from exc
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError("config", f"no such file: {path}")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
