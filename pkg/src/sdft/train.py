"""Losses, optimiser and training loops.

Three procedures share one loop:

* ``scratch``: fresh initialisation, plain diffusion loss.
* ``naive_finetune``: start from a source model, plain diffusion loss.
* ``sdft``: start from a source model, keep a frozen copy of it as teacher and
  add SNR-weighted prediction distillation on noised target data plus
  distillation on pure-noise inputs.

Randomness is split into named substreams (minibatch indices, and one stream
per loss term) so that switching a term off never shifts the draws seen by the
others. With both distillation weights at zero an sdft run therefore follows
the naive fine-tuning trajectory bit for bit.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from sdft import tensor as tn
from sdft.data import ToyDataset
from sdft.model import DenoiserModel, clone, clone_frozen, init_model, predict_noise, predict_noise_array
from sdft.schedule import NoiseSchedule, WeightingScheme, snr_weight
from sdft.tensor import Tensor

log = logging.getLogger(__name__)

MODES = ("scratch", "naive_finetune", "sdft")


@dataclass(frozen=True)
class SdftConfig:
    lambda_distill: float = 0.1
    lambda_aux: float = 0.1
    gamma_distill: float = 3.0
    gamma_aux: float = 3.0
    k: float = 1.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"SdftConfig.{name} must be finite and >= 0, got {value}")
        if not self.k > 0:
            raise ValueError("SdftConfig.k must be > 0")


# hyperparameter columns of the two reference fine-tuning setups
LOW_GAMMA = SdftConfig(lambda_distill=0.1, lambda_aux=0.1, gamma_distill=3.0, gamma_aux=3.0)
HIGH_GAMMA = SdftConfig(lambda_distill=0.1, lambda_aux=0.3, gamma_distill=50.0, gamma_aux=50.0)
PRESETS = {"low-gamma": LOW_GAMMA, "high-gamma": HIGH_GAMMA}


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 1000
    batch_size: int = 256
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 100

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TrainRecord:
    iteration: int
    loss_diffusion: float
    loss_distill: float
    loss_aux: float
    loss_total: float

    FIELDS = ("iteration", "loss_diffusion", "loss_distill", "loss_aux", "loss_total")


class Streams:
    """Independent generators keyed by consumer name, derived from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rngs: dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        rng = self._rngs.get(name)
        if rng is None:
            key = zlib.crc32(name.encode())
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, key]))
            self._rngs[name] = rng
        return rng


def forward_perturb(x0, t, eps, s: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps, row by row."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ValueError(f"forward_perturb: x0 {x0.shape} and eps {eps.shape} differ")
    t = np.broadcast_to(np.asarray(t), x0.shape[:1])
    s.check_t(t)
    ab = s.alpha_bar[t - 1][:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def _predict(model, x, t) -> Tensor:
    if isinstance(model, DenoiserModel):
        return predict_noise(model, x, t)
    out = model(x, t)
    return out if isinstance(out, Tensor) else Tensor(out)


def _draw_t(rng: np.random.Generator, s: NoiseSchedule, n: int) -> np.ndarray:
    return rng.integers(1, s.T + 1, size=n)


def loss_diffusion(model, x0, s: NoiseSchedule, rng: np.random.Generator,
                   scheme: WeightingScheme = WeightingScheme()) -> Tensor:
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape[0] == 0:
        raise ValueError("loss_diffusion: empty batch")
    t = _draw_t(rng, s, len(x0))
    eps = rng.standard_normal(x0.shape)
    x_t = forward_perturb(x0, t, eps, s)
    w = snr_weight(s.snr[t - 1], scheme.kind, scheme.k, scheme.gamma)
    return tn.mean_squared(_predict(model, x_t, t), Tensor(eps), row_weights=w)


def _check_pair(src: DenoiserModel, trg: DenoiserModel) -> None:
    if not src.frozen:
        raise ValueError("the teacher model must be frozen")
    if src.input_dim != trg.input_dim:
        raise ValueError(f"teacher input_dim {src.input_dim} != student input_dim {trg.input_dim}")


def matching_loss(src: DenoiserModel, trg, x, t, s: NoiseSchedule, k: float, gamma: float) -> Tensor:
    """Weighted squared gap between teacher and student predictions at given inputs and timesteps."""
    teacher = Tensor(predict_noise_array(src, x, t))
    w = snr_weight(s.snr[t - 1], "sdft", k, gamma)
    return tn.mean_squared(_predict(trg, x, t), teacher, row_weights=w)


def loss_distill(src: DenoiserModel, trg, x0_trg, s: NoiseSchedule, cfg: SdftConfig,
                 rng: np.random.Generator) -> Tensor:
    """Teacher/student epsilon matching on noised target data, weighted by 1/(k+SNR)^gamma."""
    _check_pair(src, trg)
    x0 = np.asarray(x0_trg, dtype=np.float64)
    if x0.shape[0] == 0:
        raise ValueError("loss_distill: empty batch")
    t = _draw_t(rng, s, len(x0))
    eps = rng.standard_normal(x0.shape)
    x_t = forward_perturb(x0, t, eps, s)
    return matching_loss(src, trg, x_t, t, s, cfg.k, cfg.gamma_distill)


def loss_aux(src: DenoiserModel, trg, s: NoiseSchedule, cfg: SdftConfig,
             rng: np.random.Generator, batch_size: int) -> Tensor:
    """Teacher/student matching where the input is pure noise at every timestep."""
    _check_pair(src, trg)
    if batch_size < 1:
        raise ValueError("loss_aux: empty batch")
    t = _draw_t(rng, s, batch_size)
    x_T = rng.standard_normal((batch_size, src.input_dim))
    return matching_loss(src, trg, x_T, t, s, cfg.k, cfg.gamma_aux)


def combine_losses(diffusion: Tensor, distill: Tensor | None, aux: Tensor | None,
                   cfg: SdftConfig) -> Tensor:
    total = diffusion
    if distill is not None:
        total = tn.add(total, tn.scale(distill, cfg.lambda_distill))
    if aux is not None:
        total = tn.add(total, tn.scale(aux, cfg.lambda_aux))
    return total


def loss_total(src: DenoiserModel | None, trg, x0, s: NoiseSchedule, cfg: SdftConfig,
               streams: Streams, iteration: int = 0) -> tuple[Tensor, TrainRecord]:
    """Diffusion loss plus the weighted distillation terms.

    A term whose lambda is zero is never evaluated and its stream is never read.
    """
    diff = loss_diffusion(trg, x0, s, streams["diffusion"])
    d = a = None
    if cfg.lambda_distill > 0:
        d = loss_distill(src, trg, x0, s, cfg, streams["distill"])
    if cfg.lambda_aux > 0:
        a = loss_aux(src, trg, s, cfg, streams["aux"], len(x0))
    total = combine_losses(diff, d, a, cfg)
    d_val = 0.0 if d is None else d.item()
    a_val = 0.0 if a is None else a.item()
    return total, TrainRecord(iteration, diff.item(), d_val, a_val, total.item())


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> AdamState:
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], grads: list[np.ndarray | None], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
              names: list[str] | None = None) -> AdamState:
    """One bias-corrected Adam update, in place on ``params`` and ``state``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("adam_step: params, grads and state lengths differ")
    for i, g in enumerate(grads):
        if g is not None:
            if g.shape != params[i].shape:
                raise ValueError(f"adam_step: gradient shape {g.shape} != parameter {params[i].shape}")
            if not np.all(np.isfinite(g)):
                label = names[i] if names else f"parameter {i}"
                raise FloatingPointError(f"non-finite gradient for {label}")
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


@dataclass
class _Window:
    sums: np.ndarray = field(default_factory=lambda: np.zeros(4))
    count: int = 0

    def add(self, rec: TrainRecord) -> None:
        self.sums += (rec.loss_diffusion, rec.loss_distill, rec.loss_aux, rec.loss_total)
        self.count += 1

    def flush(self, iteration: int) -> TrainRecord:
        d, di, a, tot = (self.sums / self.count).tolist()
        self.sums[:] = 0.0
        self.count = 0
        return TrainRecord(iteration, d, di, a, tot)


def _normalise_mode(mode: str) -> str:
    if mode == "naive":
        return "naive_finetune"
    if mode not in MODES:
        raise ValueError(f"unknown training mode {mode!r}; expected one of {MODES}")
    return mode


def run_training(mode: str, dataset: ToyDataset | np.ndarray, s: NoiseSchedule,
                 cfg: SdftConfig = LOW_GAMMA, train_cfg: TrainConfig = TrainConfig(),
                 source: DenoiserModel | None = None, model_dims: dict | None = None,
                 on_eval: Callable[[DenoiserModel, int, TrainRecord], None] | None = None,
                 ) -> tuple[DenoiserModel, list[TrainRecord]]:
    """Train a denoiser and return it with the logged loss records.

    Each record holds the mean of the per-step losses since the previous log
    point; records are emitted every ``train_cfg.eval_every`` iterations and
    at the final iteration.
    """
    mode = _normalise_mode(mode)
    points = dataset.points if isinstance(dataset, ToyDataset) else np.asarray(dataset, float)
    if len(points) == 0:
        raise ValueError("empty training set")

    teacher = None
    if mode == "scratch":
        model = init_model(seed=train_cfg.seed, **(model_dims or {}))
        cfg = SdftConfig(0.0, 0.0, cfg.gamma_distill, cfg.gamma_aux, cfg.k)
    else:
        if source is None:
            raise ValueError(f"mode {mode!r} needs a source model checkpoint")
        model = clone(source, frozen=False)
        if mode == "naive_finetune":
            cfg = SdftConfig(0.0, 0.0, cfg.gamma_distill, cfg.gamma_aux, cfg.k)
        else:
            teacher = clone_frozen(source)

    params = model.parameters
    names = [f"layer{i // 2}.{'weight' if i % 2 == 0 else 'bias'}" for i in range(len(params))]
    state = AdamState.zeros_like(params)
    streams = Streams(train_cfg.seed)
    window = _Window()
    records: list[TrainRecord] = []
    for it in range(1, train_cfg.iterations + 1):
        idx = streams["batch"].integers(0, len(points), size=train_cfg.batch_size)
        model.zero_grad()
        loss, rec = loss_total(teacher, model, points[idx], s, cfg, streams, it)
        tn.backward(loss)
        adam_step(params, [p.grad for p in params], state, train_cfg.learning_rate,
                  train_cfg.adam_beta1, train_cfg.adam_beta2, train_cfg.adam_eps, names)
        window.add(rec)
        if it % train_cfg.eval_every == 0 or it == train_cfg.iterations:
            rec = window.flush(it)
            records.append(rec)
            log.info("%s it=%d diffusion=%.5f distill=%.5f aux=%.5f total=%.5f", mode, it,
                     rec.loss_diffusion, rec.loss_distill, rec.loss_aux, rec.loss_total)
            if on_eval is not None:
                on_eval(model, it, rec)
    model.zero_grad()
    return model, records
