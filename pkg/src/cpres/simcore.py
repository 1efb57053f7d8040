"""Event scheduling, seeded randomness, action encoding and the environment contract."""
from __future__ import annotations

import hashlib
import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import EpisodeFinished, OutOfRange, PastTime


@dataclass(frozen=True)
class MdpSpec:
    obs_dim: int
    action_dims: tuple[int, ...]
    gamma: float = 0.99
    max_steps: int = 50

    def __post_init__(self):
        object.__setattr__(self, "action_dims", tuple(int(d) for d in self.action_dims))
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.action_dims or any(d < 1 for d in self.action_dims):
            raise ValueError(f"every action dim must be >= 1, got {self.action_dims}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.obs_dim < 1:
            raise ValueError("obs_dim must be >= 1")

    @property
    def n_actions(self) -> int:
        return math.prod(self.action_dims)


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class _Empty:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


class EventQueue:
    """Time-ordered event queue; simultaneous events leave in insertion order."""

    def __init__(self, start: float = 0.0):
        self.clock = float(start)
        self._heap: list[tuple[float, int, Any]] = []
        self._seq = itertools.count()

    def __len__(self):
        return len(self._heap)

    def schedule(self, event: Any, time: float) -> int:
        if time < self.clock:
            raise PastTime(f"cannot schedule at t={time} before clock t={self.clock}")
        event_id = next(self._seq)
        heapq.heappush(self._heap, (float(time), event_id, event))
        return event_id

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def advance(self):
        """Pop the earliest event as ``(time, event)``, or return ``EMPTY``."""
        if not self._heap:
            return EMPTY
        time, _, event = heapq.heappop(self._heap)
        self.clock = time
        return time, event

    def clear(self):
        self._heap.clear()


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id * 1_000_003 + stream_id + 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def encode_action(indices: Sequence[int], dims: Sequence[int]) -> int:
    """Flatten per-factor indices; the first factor varies fastest."""
    if len(indices) != len(dims):
        raise OutOfRange(f"expected {len(dims)} factors, got {len(indices)}")
    flat, stride = 0, 1
    for a, d in zip(indices, dims):
        a = int(a)
        if not 0 <= a < d:
            raise OutOfRange(f"index {a} out of range for cardinality {d}")
        flat += a * stride
        stride *= d
    return flat


def decode_action(index: int, dims: Sequence[int]) -> tuple[int, ...]:
    index = int(index)
    if not 0 <= index < math.prod(dims):
        raise OutOfRange(f"action {index} out of range for dims {tuple(dims)}")
    out = []
    for d in dims:
        out.append(index % d)
        index //= d
    return tuple(out)


class Env:
    """Common MDP contract for the rerouting, feeder and coupled environments.

    Subclasses set ``spec`` and implement ``_reset`` / ``_step``; the base class
    tracks the step counter and the max-steps cap.
    """

    spec: MdpSpec
    env_id: str = "env"

    def __init__(self):
        self.t = 0
        self._active = False

    def reset(self, seed=None) -> StepResult:
        self.t = 0
        result = self._reset(seed)
        self._active = not result.done
        result.info.setdefault("goal_reached", bool(result.done))
        result.info.setdefault("truncated", False)
        return result

    def step(self, action: int) -> StepResult:
        if not self._active:
            raise EpisodeFinished("step() called on a finished episode; call reset()")
        action = int(action)
        if not 0 <= action < self.spec.n_actions:
            raise OutOfRange(f"action {action} not in [0, {self.spec.n_actions})")
        self.t += 1
        result = self._step(action)
        goal = bool(result.info.get("goal_reached", result.done))
        truncated = not goal and self.t >= self.spec.max_steps
        result.info["goal_reached"] = goal
        result.info["truncated"] = truncated
        result.done = goal or truncated
        self._active = not result.done
        return result

    @property
    def active(self) -> bool:
        return self._active

    def spec_hash(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "env_id": self.env_id,
            "obs_dim": self.spec.obs_dim,
            "action_dims": list(self.spec.action_dims),
            "max_steps": self.spec.max_steps,
        }

    def _reset(self, seed) -> StepResult:  # pragma: no cover - abstract
        raise NotImplementedError

    def _step(self, action: int) -> StepResult:  # pragma: no cover - abstract
        raise NotImplementedError
