"""Desk-scale ring benchmark.

A source model learns an 8-mode unit ring. It is then fine-tuned on a
3-mode ring of radius 2, once naively and once with self-distillation,
plus an ablation without the pure-noise term. Every fine-tuned model is
scored on sample coverage, SDEdit translation of held-out points from
the unseen angles, and alignment with the source under shared DDIM noise.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from sdft.data import RingSpec, gen_limited_target, gen_ring
from sdft.metrics import alignment, angular_coverage, faithfulness
from sdft.model import DenoiserModel, init_model
from sdft.samplers import SamplerSpec, TranslationSpec, aligned_pair, sample, sdedit_translate
from sdft.schedule import NoiseSchedule, make_schedule
from sdft.train import LOW_GAMMA, SdftConfig, TrainConfig, run_training

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchmarkConfig:
    source_iterations: int = 20_000
    finetune_iterations: int = 8_000
    learning_rate: float = 1e-3
    finetune_learning_rate: float = 1e-3
    sdft: SdftConfig = LOW_GAMMA
    n_samples: int = 2000
    capture_angle: float = np.pi / 16
    t0_frac: float = 0.5
    sample_seed: int = 1
    align_seed: int = 2
    translate_seed: int = 5
    heldout_seed: int = 99
    train_seed: int = 0
    source: RingSpec = RingSpec()
    target_radius: float = 2.0
    keep_modes: tuple = (0, 1, 2)


@dataclass
class ModelScore:
    name: str
    coverage: float
    per_mode_counts: list
    sample_radius_median: float
    angle_median: float
    radius_shift_median: float
    alignment_median: float
    seconds: float = 0.0

    def line(self) -> str:
        return (f"{self.name:<8} coverage={self.coverage:.3f} counts={self.per_mode_counts} "
                f"r_med={self.sample_radius_median:.3f} translate_angle={self.angle_median:.4f} "
                f"translate_dr={self.radius_shift_median:.4f} align={self.alignment_median:.4f} "
                f"({self.seconds:.0f}s)")


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    scores: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> ModelScore:
        return self.scores[name]

    def summary(self) -> str:
        return "\n".join(sc.line() for sc in self.scores.values())


def heldout_unseen(cfg: BenchmarkConfig) -> np.ndarray:
    """Fresh source-ring points whose mode the target never shows."""
    ring = gen_ring(cfg.source.n_modes, cfg.source.radius, cfg.source.std,
                    n_points=4 * cfg.n_samples, seed=cfg.heldout_seed)
    unseen = ~np.isin(ring.mode_labels, cfg.keep_modes)
    return ring.points[unseen][:cfg.n_samples]


def score_model(name: str, model: DenoiserModel, source: DenoiserModel, s: NoiseSchedule,
                cfg: BenchmarkConfig, heldout: np.ndarray | None = None) -> ModelScore:
    mode_angles = 2.0 * np.pi * np.arange(cfg.source.n_modes) / cfg.source.n_modes
    x = sample(model, SamplerSpec(seed=cfg.sample_seed), s, cfg.n_samples)
    cov, counts = angular_coverage(x, mode_angles, cfg.capture_angle)
    if heldout is None:
        heldout = heldout_unseen(cfg)
    moved = sdedit_translate(model, heldout, TranslationSpec(cfg.t0_frac), s,
                             np.random.default_rng(cfg.translate_seed))
    ang, dr = faithfulness(heldout, moved)
    a, b = aligned_pair(source, model, SamplerSpec(seed=cfg.align_seed), s, cfg.n_samples)
    return ModelScore(name, cov, counts.tolist(), float(np.median(np.hypot(*x.T))),
                      ang, dr, alignment(a, b))


def train_source(cfg: BenchmarkConfig, s: NoiseSchedule, cache: Path | None = None) -> DenoiserModel:
    """Train (or reload from ``cache``) the source ring model."""
    if cache is not None and cache.exists():
        model = init_model(seed=cfg.train_seed)
        model.load_flat(np.load(cache))
        return model
    data = gen_ring(cfg.source.n_modes, cfg.source.radius, cfg.source.std)
    model, _ = run_training("scratch", data, s, train_cfg=TrainConfig(
        iterations=cfg.source_iterations, eval_every=1000, learning_rate=cfg.learning_rate,
        seed=cfg.train_seed))
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        np.save(cache, model.flat_parameters())
    return model


def run_benchmark(cfg: BenchmarkConfig = BenchmarkConfig(), runs=("naive", "sdft", "noaux"),
                  s: NoiseSchedule | None = None, source_cache: Path | None = None) -> BenchmarkResult:
    s = s or make_schedule()
    result = BenchmarkResult(cfg)
    t0 = time.perf_counter()
    source = train_source(cfg, s, source_cache)
    heldout = heldout_unseen(cfg)
    result.scores["source"] = score_model("source", source, source, s, cfg, heldout)
    result.scores["source"].seconds = time.perf_counter() - t0
    log.info(result.scores["source"].line())

    target = gen_limited_target(cfg.source, cfg.target_radius, cfg.keep_modes, seed=1)
    setups = {"naive": ("naive_finetune", cfg.sdft),
              "sdft": ("sdft", cfg.sdft),
              "noaux": ("sdft", replace(cfg.sdft, lambda_aux=0.0))}
    for name in runs:
        mode, sdft_cfg = setups[name]
        t0 = time.perf_counter()
        model, _ = run_training(mode, target, s, sdft_cfg, TrainConfig(
            iterations=cfg.finetune_iterations, eval_every=1000,
            learning_rate=cfg.finetune_learning_rate, seed=cfg.train_seed), source=source)
        sc = score_model(name, model, source, s, cfg, heldout)
        sc.seconds = time.perf_counter() - t0
        result.scores[name] = sc
        log.info(sc.line())
    return result
