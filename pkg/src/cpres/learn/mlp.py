"""Fully connected networks with hand-written reverse mode, plus Adam."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteLoss, ShapeMismatch

_ACT = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "relu": (lambda z: np.maximum(z, 0.0), lambda y: (y > 0).astype(y.dtype)),
    "linear": (lambda z: z, lambda y: np.ones_like(y)),
}


@dataclass(frozen=True)
class MlpArch:
    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACT:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def sizes(self) -> list[int]:
        return [self.in_dim, *self.hidden, self.out_dim]

    def to_dict(self) -> dict:
        return {"in_dim": self.in_dim, "hidden": list(self.hidden), "out_dim": self.out_dim,
                "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpArch":
        return cls(int(d["in_dim"]), tuple(d["hidden"]), int(d["out_dim"]), d.get("activation", "tanh"))


@dataclass
class MlpParams:
    """Weights ``W[i]`` have shape (fan_in, fan_out); the last layer is affine (no activation)."""

    arch: MlpArch
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, arch: MlpArch, rng: np.random.Generator, out_scale: float = 1.0) -> "MlpParams":
        sizes = arch.sizes
        ws, bs = [], []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            # orthogonal init, the usual choice for small policy nets
            m = rng.standard_normal((max(a, b), min(a, b)))
            q, r = np.linalg.qr(m)
            q = q * np.sign(np.diag(r))
            w = q if a >= b else q.T
            gain = out_scale if i == len(sizes) - 2 else np.sqrt(2.0)
            ws.append(gain * w[:a, :b])
            bs.append(np.zeros(b))
        return cls(arch, ws, bs)

    @classmethod
    def zeros(cls, arch: MlpArch) -> "MlpParams":
        s = arch.sizes
        return cls(arch, [np.zeros((a, b)) for a, b in zip(s[:-1], s[1:])], [np.zeros(b) for b in s[1:]])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, v: np.ndarray):
        v = np.asarray(v, dtype=float)
        if v.size != self.n_params:
            raise ShapeMismatch(f"expected {self.n_params} parameters, got {v.size}")
        k = 0
        for a in self.arrays():
            a[...] = v[k:k + a.size].reshape(a.shape)
            k += a.size

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.arch.in_dim:
        raise ShapeMismatch(f"input dim {x.shape[-1]} != {params.arch.in_dim}")
    return x


def mlp_forward(params: MlpParams, x, return_cache: bool = False):
    """Evaluate the network on ``x`` of shape (in_dim,) or (batch, in_dim)."""
    x = _check_input(params, x)
    act, _ = _ACT[params.arch.activation]
    h = x
    cache = [h]
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < n - 1:
            h = act(h)
        cache.append(h)
    return (h, cache) if return_cache else h


def mlp_backward(params: MlpParams, cache, upstream):
    """Reverse pass from a forward cache; returns (weight grads, bias grads, input grad)."""
    _, dact = _ACT[params.arch.activation]
    g = np.asarray(upstream, dtype=float)
    if g.shape != cache[-1].shape:
        raise ShapeMismatch(f"upstream shape {g.shape} != output shape {cache[-1].shape}")
    n = len(params.weights)
    gw: list = [None] * n
    gb: list = [None] * n
    batched = g.ndim == 2
    for i in range(n - 1, -1, -1):
        h_in = cache[i]
        if batched:
            gw[i] = h_in.T @ g
            gb[i] = g.sum(axis=0)
        else:
            gw[i] = np.outer(h_in, g)
            gb[i] = g.copy()
        g = g @ params.weights[i].T
        if i > 0:
            g = g * dact(cache[i])
    return gw, gb, g


def mlp_grad(params: MlpParams, x, upstream) -> MlpParams:
    """Parameter gradients of ``sum(upstream * f(x))``, returned as an MlpParams of the same shape."""
    _, cache = mlp_forward(params, x, return_cache=True)
    gw, gb, _ = mlp_backward(params, cache, upstream)
    return MlpParams(params.arch, gw, gb)


def grad_norm(grads: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


@dataclass
class Adam:
    """Adam over a fixed list of arrays, updated in place, with global-norm clipping."""

    params: list[np.ndarray]
    lr: float = 3e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    max_grad_norm: float | None = 0.5
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads: list[np.ndarray]) -> float:
        """Apply one update; raises NonFiniteLoss (leaving params untouched) on non-finite grads."""
        norm = grad_norm(grads)
        if not np.isfinite(norm):
            raise NonFiniteLoss("non-finite gradient")
        scale = 1.0
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            scale = self.max_grad_norm / (norm + 1e-12)
        self.t += 1
        b1, b2 = self.betas
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g * scale
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm
