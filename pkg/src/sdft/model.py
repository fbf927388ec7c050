"""Time-conditioned MLP that predicts the noise added to a low-dimensional point."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from sdft import tensor as tn
from sdft.tensor import Tensor


@dataclass(frozen=True)
class TimeEmbedding:
    dim: int = 32
    max_period: float = 10000.0

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2:
            raise ValueError(f"time embedding dim must be a positive even number, got {self.dim}")


def embed_time(t, e: TimeEmbedding) -> np.ndarray:
    """Interleaved sin/cos features of ``t`` at geometrically spaced frequencies.

    Scalar ``t`` gives a ``(dim,)`` vector, an array of timesteps gives ``(n, dim)``.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    half = e.dim // 2
    freqs = np.exp(-np.log(e.max_period) * np.arange(half, dtype=np.float64) / half)
    args = t_arr[..., None] * freqs
    out = np.empty(t_arr.shape + (e.dim,), dtype=np.float64)
    out[..., 0::2] = np.sin(args)
    out[..., 1::2] = np.cos(args)
    return out


class DenoiserModel:
    """epsilon-prediction network: ``[x, embed(t)] -> hidden layers (SiLU) -> eps``."""

    def __init__(self, input_dim: int, hidden_dims, time_embed_dim: int,
                 weights: list[np.ndarray], biases: list[np.ndarray],
                 frozen: bool = False, max_period: float = 10000.0):
        self.input_dim = int(input_dim)
        self.hidden_dims = tuple(int(h) for h in hidden_dims)
        self.embedding = TimeEmbedding(int(time_embed_dim), max_period)
        self.frozen = bool(frozen)
        self.layers = [
            (Tensor(w, requires_grad=not self.frozen), Tensor(b, requires_grad=not self.frozen))
            for w, b in zip(weights, biases)
        ]

    @property
    def time_embed_dim(self) -> int:
        return self.embedding.dim

    @property
    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer]

    def layer_sizes(self) -> list[int]:
        return [self.input_dim + self.time_embed_dim, *self.hidden_dims, self.input_dim]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters)

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters])

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.num_parameters():
            raise ValueError(f"expected {self.num_parameters()} parameters, got {flat.size}")
        pos = 0
        for p in self.parameters:
            n = p.data.size
            p.data = flat[pos:pos + n].reshape(p.shape).copy()
            pos += n

    def zero_grad(self) -> None:
        tn.zero_grad(self.parameters)

    def same_architecture(self, other: DenoiserModel) -> bool:
        return (self.input_dim, self.hidden_dims, self.embedding) == (
            other.input_dim, other.hidden_dims, other.embedding)

    def __repr__(self) -> str:
        return (f"DenoiserModel(input_dim={self.input_dim}, hidden_dims={list(self.hidden_dims)}, "
                f"time_embed_dim={self.time_embed_dim}, frozen={self.frozen})")


def param_count(input_dim: int, hidden_dims, time_embed_dim: int) -> int:
    sizes = [input_dim + time_embed_dim, *hidden_dims, input_dim]
    return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))


def init_model(input_dim: int = 2, hidden_dims=(128, 128, 128), time_embed_dim: int = 32,
               seed: int = 0, max_period: float = 10000.0) -> DenoiserModel:
    if input_dim < 1 or any(h < 1 for h in hidden_dims):
        raise ValueError("all layer dimensions must be >= 1")
    if time_embed_dim < 2 or time_embed_dim % 2:
        raise ValueError(f"time_embed_dim must be even, got {time_embed_dim}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1D17]))
    sizes = [input_dim + time_embed_dim, *hidden_dims, input_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return DenoiserModel(input_dim, hidden_dims, time_embed_dim, weights, biases,
                         max_period=max_period)


def predict_noise(m: DenoiserModel, x_t, t) -> Tensor:
    x = x_t if isinstance(x_t, Tensor) else Tensor(x_t)
    if x.data.ndim != 2 or x.shape[1] != m.input_dim:
        raise ValueError(f"expected input of shape (batch, {m.input_dim}), got {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise ValueError("predict_noise: non-finite input")
    t = np.broadcast_to(np.asarray(t), (x.shape[0],))
    if t.size and t.min() < 0:
        raise ValueError("predict_noise: negative timestep")
    h = tn.concat_cols(x, Tensor(embed_time(t, m.embedding)))
    last = len(m.layers) - 1
    for i, (w, b) in enumerate(m.layers):
        h = tn.linear(h, w, b)
        if i < last:
            h = tn.silu(h)
    return h


def predict_noise_array(m: DenoiserModel, x_t: np.ndarray, t) -> np.ndarray:
    """Inference path without graph construction; numerically identical to predict_noise."""
    x = np.asarray(x_t, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("predict_noise: non-finite input")
    t = np.broadcast_to(np.asarray(t), (x.shape[0],))
    h = np.concatenate([x, embed_time(t, m.embedding)], axis=1)
    last = len(m.layers) - 1
    for i, (w, b) in enumerate(m.layers):
        h = h @ w.data + b.data
        if i < last:
            h = h * (0.5 * (1.0 + np.tanh(0.5 * h)))
    return h


def clone(m: DenoiserModel, frozen: bool | None = None) -> DenoiserModel:
    return DenoiserModel(
        m.input_dim, m.hidden_dims, m.time_embed_dim,
        [copy.deepcopy(w.data) for w, _ in m.layers],
        [copy.deepcopy(b.data) for _, b in m.layers],
        frozen=m.frozen if frozen is None else frozen,
        max_period=m.embedding.max_period,
    )


def clone_frozen(m: DenoiserModel) -> DenoiserModel:
    return clone(m, frozen=True)
