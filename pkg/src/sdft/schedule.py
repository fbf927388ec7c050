"""Noise schedules, signal-to-noise ratios and timestep loss weights.

Timesteps are 1-based: ``t`` runs over ``1..T`` and array index ``t - 1``
holds the value for ``t``. ``alpha_bar_at(s, 0)`` is defined as 1 so that
deterministic samplers can step all the way down to clean data.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

WEIGHT_KINDS = ("simple", "constant_one", "p2", "sdft", "min_snr")


@dataclass(frozen=True)
class NoiseSchedule:
    family: str
    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray = field(repr=False, compare=False)
    alpha: np.ndarray = field(repr=False, compare=False)
    alpha_bar: np.ndarray = field(repr=False, compare=False)
    snr: np.ndarray = field(repr=False, compare=False)

    def check_t(self, t) -> None:
        t = np.asarray(t)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise ValueError(f"timestep out of range [1, {self.T}]: {t.min()}..{t.max()}")

    def to_dict(self) -> dict:
        return {"family": self.family, "T": self.T,
                "beta_start": self.beta_start, "beta_end": self.beta_end}

    def tables_equal(self, other: NoiseSchedule) -> bool:
        return all(np.array_equal(getattr(self, n), getattr(other, n))
                   for n in ("beta", "alpha", "alpha_bar", "snr"))


def make_schedule(family: str = "linear", T: int = 1000,
                  beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    T = int(T)
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if family == "linear":
        if not 0.0 < beta_start <= beta_end < 1.0:
            raise ValueError(
                f"linear schedule needs 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
        if T == 1:
            beta = np.array([beta_start], dtype=np.float64)
        else:
            beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    elif family == "cosine":
        # squared-cosine alpha_bar with offset 0.008; beta_start/beta_end unused
        s = 0.008
        steps = np.arange(T + 1, dtype=np.float64) / T
        f = np.cos((steps + s) / (1 + s) * math.pi / 2) ** 2
        beta = np.clip(1.0 - f[1:] / f[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule family {family!r}")
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    snr = alpha_bar / (1.0 - alpha_bar)
    for arr in (beta, alpha, alpha_bar, snr):
        arr.setflags(write=False)
    return NoiseSchedule(family, T, float(beta_start), float(beta_end), beta, alpha, alpha_bar, snr)


def schedule_from_dict(d: dict) -> NoiseSchedule:
    return make_schedule(d["family"], int(d["T"]), float(d["beta_start"]), float(d["beta_end"]))


def schedule_to_json(s: NoiseSchedule) -> str:
    return json.dumps(s.to_dict(), sort_keys=True)


def schedule_from_json(text: str) -> NoiseSchedule:
    return schedule_from_dict(json.loads(text))


def alpha_bar_at(s: NoiseSchedule, t):
    """alpha_bar for 0 <= t <= T, with alpha_bar(0) = 1."""
    t = np.asarray(t)
    if t.size and (t.min() < 0 or t.max() > s.T):
        raise ValueError(f"timestep out of range [0, {s.T}]")
    padded = np.concatenate([[1.0], s.alpha_bar])
    out = padded[t]
    return float(out) if out.ndim == 0 else out


def snr(s: NoiseSchedule, t):
    s.check_t(t)
    out = s.snr[np.asarray(t) - 1]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class WeightingScheme:
    kind: str = "simple"
    k: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weighting {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.kind in ("p2", "sdft") and not self.k > 0:
            raise ValueError(f"k must be > 0 for {self.kind}, got {self.k}")


def snr_weight(snr_values, kind: str, k: float = 1.0, gamma: float = 0.0):
    """Effective coefficient multiplying the plain epsilon squared error.

    The simple DDPM weight cancels the likelihood prefactor, so it maps to 1.
    P2 and the distillation weights divide that by ``(k + SNR)**gamma``.
    """
    snr_values = np.asarray(snr_values, dtype=np.float64)
    if kind in ("simple", "constant_one"):
        out = np.ones_like(snr_values)
    elif kind in ("p2", "sdft"):
        out = 1.0 / (k + snr_values) ** gamma
    elif kind == "min_snr":
        out = np.minimum(snr_values, gamma)
    else:
        raise ValueError(f"unknown weighting {kind!r}")
    return float(out) if out.ndim == 0 else out


def weight(scheme: WeightingScheme, s: NoiseSchedule, t):
    return snr_weight(snr(s, t), scheme.kind, scheme.k, scheme.gamma)


def weight_curve(scheme: WeightingScheme, s: NoiseSchedule) -> np.ndarray:
    return np.asarray(snr_weight(s.snr, scheme.kind, scheme.k, scheme.gamma))
