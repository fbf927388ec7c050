"""Reverse processes: ancestral sampling, deterministic DDIM, the partial
reverse process started from pure noise, SDEdit translation and paired
(DDIB-style) sampling through two models from shared noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sdft.model import DenoiserModel, predict_noise_array
from sdft.schedule import NoiseSchedule, alpha_bar_at
from sdft.train import forward_perturb

SAMPLER_KINDS = ("ancestral", "ddim")


@dataclass(frozen=True)
class SamplerSpec:
    kind: str = "ddim"
    num_steps: int = 40
    start_t: int | None = None  # None means T
    seed: int = 0

    def resolve_start(self, s: NoiseSchedule) -> int:
        return s.T if self.start_t is None else int(self.start_t)

    def validate(self, s: NoiseSchedule) -> None:
        if self.kind not in SAMPLER_KINDS:
            raise ValueError(f"unknown sampler {self.kind!r}")
        if not 1 <= self.num_steps <= s.T:
            raise ValueError(f"num_steps must lie in [1, {s.T}], got {self.num_steps}")
        start = self.resolve_start(s)
        if not 1 <= start <= s.T:
            raise ValueError(f"start_t must lie in [1, {s.T}], got {start}")


@dataclass(frozen=True)
class TranslationSpec:
    t0_frac: float = 0.5
    sampler: SamplerSpec = SamplerSpec()

    def __post_init__(self):
        if not 0.0 <= self.t0_frac <= 1.0:
            raise ValueError(f"t0_frac must lie in [0, 1], got {self.t0_frac}")


def _eps(model, x, t) -> np.ndarray:
    if isinstance(model, DenoiserModel):
        return predict_noise_array(model, x, t)
    return np.asarray(model(x, t), dtype=np.float64)


def ancestral_step(model, x_t, t: int, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    if not 1 <= t <= s.T:
        raise ValueError(f"timestep {t} out of range [1, {s.T}]")
    x_t = np.asarray(x_t, dtype=np.float64)
    beta, alpha, ab = s.beta[t - 1], s.alpha[t - 1], s.alpha_bar[t - 1]
    eps = _eps(model, x_t, np.full(len(x_t), t))
    mean = (x_t - (beta / np.sqrt(1.0 - ab)) * eps) / np.sqrt(alpha)
    if t == 1:
        return mean
    return mean + np.sqrt(beta) * rng.standard_normal(x_t.shape)


def ddim_step(model, x_t, t: int, t_prev: int, s: NoiseSchedule) -> np.ndarray:
    """Deterministic (eta = 0) DDIM update from ``t`` to ``t_prev``; ``t_prev = 0`` returns x0-hat."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if t_prev == t:
        return x_t.copy()
    if not (0 <= t_prev < t <= s.T):
        raise ValueError(f"ddim_step needs 0 <= t_prev < t <= T, got t={t}, t_prev={t_prev}")
    ab, ab_prev = s.alpha_bar[t - 1], alpha_bar_at(s, t_prev)
    eps = _eps(model, x_t, np.full(len(x_t), t))
    x0_hat = (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
    if t_prev == 0:
        return x0_hat
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps


def ddim_timesteps(start_t: int, num_steps: int) -> list[int]:
    """Evenly spaced decreasing timesteps from ``start_t`` down to 1 (inclusive)."""
    n = max(1, min(num_steps, start_t))
    if n == 1:
        return [start_t]
    ts = np.round(np.linspace(start_t, 1, n)).astype(int)
    return sorted(set(int(t) for t in ts), reverse=True)


def run_ddim(model, x, start_t: int, num_steps: int, s: NoiseSchedule) -> np.ndarray:
    ts = ddim_timesteps(start_t, num_steps)
    for t, t_prev in zip(ts, ts[1:] + [0]):
        x = ddim_step(model, x, t, t_prev, s)
    return x


def run_ancestral(model, x, start_t: int, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    for t in range(start_t, 0, -1):
        x = ancestral_step(model, x, t, s, rng)
    return x


def _reverse(model, x, start_t: int, spec: SamplerSpec, s: NoiseSchedule,
             rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "ddim":
        return run_ddim(model, x, start_t, spec.num_steps, s)
    return run_ancestral(model, x, start_t, s, rng)


def _noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x5A3B]))


def initial_noise(seed: int, n: int, dim: int) -> np.ndarray:
    return _noise_rng(seed).standard_normal((n, dim))


def sample(model: DenoiserModel, spec: SamplerSpec, s: NoiseSchedule, n: int) -> np.ndarray:
    """Draw ``n`` samples. With ``start_t < T`` the chain starts from pure noise
    at ``start_t`` (the partial reverse process)."""
    spec.validate(s)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _noise_rng(spec.seed)
    x = rng.standard_normal((n, model.input_dim))
    return _reverse(model, x, spec.resolve_start(s), spec, s, rng)


def sdedit_translate(model: DenoiserModel, x_src, spec: TranslationSpec, s: NoiseSchedule,
                     rng: np.random.Generator) -> np.ndarray:
    """Noise inputs to ``t0 = round(t0_frac * T)`` and denoise with ``model``.

    ``t0 = 0`` returns a copy of the input.
    """
    x_src = np.asarray(x_src, dtype=np.float64)
    if not np.all(np.isfinite(x_src)):
        raise ValueError("sdedit_translate: non-finite input")
    t0 = int(round(spec.t0_frac * s.T))
    if t0 == 0:
        return x_src.copy()
    spec.sampler.validate(s)
    eps = rng.standard_normal(x_src.shape)
    x = forward_perturb(x_src, np.full(len(x_src), t0), eps, s)
    # DDIM step budget scales with the fraction of the chain being run
    steps = max(1, int(round(spec.sampler.num_steps * t0 / s.T)))
    if spec.sampler.kind == "ddim":
        return run_ddim(model, x, t0, steps, s)
    return run_ancestral(model, x, t0, s, rng)


def aligned_pair(src_model: DenoiserModel, trg_model: DenoiserModel, spec: SamplerSpec,
                 s: NoiseSchedule, n: int, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run both models' deterministic DDIM chains from the same initial noise."""
    if src_model.input_dim != trg_model.input_dim:
        raise ValueError("aligned_pair: models have different input_dim")
    spec.validate(s)
    x_T = initial_noise(spec.seed if seed is None else seed, n, src_model.input_dim)
    start = spec.resolve_start(s)
    return (run_ddim(src_model, x_T, start, spec.num_steps, s),
            run_ddim(trg_model, x_T, start, spec.num_steps, s))
