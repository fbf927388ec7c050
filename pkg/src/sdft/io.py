"""Persistence: binary checkpoints, JSON run configs, CSV tables and SVG scatter plots."""
from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from sdft.data import atomic_write
from sdft.model import DenoiserModel, param_count
from sdft.schedule import NoiseSchedule, WeightingScheme, make_schedule, weight_curve
from sdft.train import SdftConfig, TrainConfig, TrainRecord

MAGIC = b"SDFT1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CsvFormatError(ValueError):
    pass


# ---------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    schedule: dict
    input_dim: int
    hidden_dims: tuple[int, ...]
    time_embed_dim: int
    max_period: float
    params: np.ndarray  # float32, flat
    iteration: int = 0
    seed: int = 0
    mode: str = "scratch"
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_model(cls, model: DenoiserModel, schedule: NoiseSchedule, iteration: int = 0,
                   seed: int = 0, mode: str = "scratch") -> Checkpoint:
        # astype rounds half to even
        return cls(schedule.to_dict(), model.input_dim, model.hidden_dims, model.time_embed_dim,
                   model.embedding.max_period, model.flat_parameters().astype("<f4"),
                   iteration, seed, mode)

    def to_model(self, frozen: bool = False) -> DenoiserModel:
        sizes = [self.input_dim + self.time_embed_dim, *self.hidden_dims, self.input_dim]
        weights, biases = [], []
        flat = self.params.astype(np.float64)
        pos = 0
        for a, b in zip(sizes[:-1], sizes[1:]):
            weights.append(flat[pos:pos + a * b].reshape(a, b))
            pos += a * b
            biases.append(flat[pos:pos + b].copy())
            pos += b
        return DenoiserModel(self.input_dim, self.hidden_dims, self.time_embed_dim, weights,
                             biases, frozen=frozen, max_period=self.max_period)

    def to_schedule(self) -> NoiseSchedule:
        d = self.schedule
        return make_schedule(d["family"], d["T"], d["beta_start"], d["beta_end"])


def _pack_str(s: str) -> bytes:
    raw = s.encode("ascii")
    if len(raw) > 255:
        raise CheckpointError(f"string field too long: {s!r}")
    return struct.pack("<B", len(raw)) + raw


def encode_checkpoint(ck: Checkpoint) -> bytes:
    expected = param_count(ck.input_dim, ck.hidden_dims, ck.time_embed_dim)
    params = np.ascontiguousarray(ck.params, dtype="<f4")
    if params.size != expected:
        raise CheckpointError(f"model dims need {expected} parameters, array has {params.size}")
    sched = ck.schedule
    out = [
        MAGIC,
        struct.pack("<H", ck.format_version),
        _pack_str(sched["family"]),
        struct.pack("<Idd", int(sched["T"]), float(sched["beta_start"]), float(sched["beta_end"])),
        struct.pack("<IIdI", ck.input_dim, ck.time_embed_dim, ck.max_period, len(ck.hidden_dims)),
        struct.pack(f"<{len(ck.hidden_dims)}I", *ck.hidden_dims),
        struct.pack("<Qq", ck.iteration, ck.seed),
        _pack_str(ck.mode),
        struct.pack("<Q", params.size),
        params.tobytes(),
    ]
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise CheckpointError(f"checkpoint truncated at byte {self.pos}")
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return vals

    def string(self) -> str:
        (n,) = self.take("<B")
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"checkpoint truncated at byte {self.pos}")
        s = self.buf[self.pos:self.pos + n]
        self.pos += n
        try:
            return s.decode("ascii")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"non-ascii string field at byte {self.pos - n}") from exc


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if buf[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"not an SDFT checkpoint (magic {buf[:len(MAGIC)]!r}, expected {MAGIC!r})")
    r = _Reader(buf)
    r.pos = len(MAGIC)
    (version,) = r.take("<H")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"incompatible checkpoint format version {version}; this build reads version {FORMAT_VERSION}")
    family = r.string()
    T, b0, b1 = r.take("<Idd")
    input_dim, temb, max_period, n_hidden = r.take("<IIdI")
    if n_hidden > 1024:
        raise CheckpointError(f"implausible hidden layer count {n_hidden}")
    hidden = r.take(f"<{n_hidden}I")
    iteration, seed = r.take("<Qq")
    mode = r.string()
    (count,) = r.take("<Q")
    expected = param_count(input_dim, hidden, temb)
    if count != expected:
        raise CheckpointError(f"parameter count field {count} does not match model dims ({expected})")
    remaining = len(buf) - r.pos
    if remaining != 4 * count:
        raise CheckpointError(f"parameter block is {remaining} bytes, header promises {4 * count}")
    params = np.frombuffer(buf, dtype="<f4", count=count, offset=r.pos).copy()
    return Checkpoint({"family": family, "T": T, "beta_start": b0, "beta_end": b1},
                      input_dim, tuple(hidden), temb, max_period, params,
                      iteration, seed, mode, version)


def save_checkpoint(path, ck: Checkpoint) -> None:
    atomic_write(path, encode_checkpoint(ck))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


# ---------------------------------------------------------------- run config

@dataclass
class ScheduleSection:
    family: str = "linear"
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass
class ModelSection:
    input_dim: int = 2
    hidden_dims: list[int] = field(default_factory=lambda: [128, 128, 128])
    time_embed_dim: int = 32


@dataclass
class DataSection:
    n_modes: int = 8
    source_radius: float = 1.0
    std: float = 0.05
    source_points: int = 8000
    target_radius: float = 2.0
    keep_modes: list[int] = field(default_factory=lambda: [0, 1, 2])
    target_points: int = 600


@dataclass
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainConfig = field(default_factory=TrainConfig)
    sdft: SdftConfig = field(default_factory=SdftConfig)
    data: DataSection = field(default_factory=DataSection)
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def make_schedule(self) -> NoiseSchedule:
        sc = self.schedule
        return make_schedule(sc.family, sc.T, sc.beta_start, sc.beta_end)


_SECTIONS = {"schedule": ScheduleSection, "model": ModelSection, "train": TrainConfig,
             "sdft": SdftConfig, "data": DataSection}


def _coerce(cls, name: str, raw) -> object:
    if not isinstance(raw, dict):
        raise ValueError(f"config section [{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValueError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        default = getattr(cls(), key)
        if isinstance(default, bool) or isinstance(value, bool):
            raise ValueError(f"[{name}].{key}: booleans are not accepted")
        if isinstance(default, int):
            if not isinstance(value, int):
                raise ValueError(f"[{name}].{key} must be an integer, got {value!r}")
        elif isinstance(default, float):
            if not isinstance(value, (int, float)):
                raise ValueError(f"[{name}].{key} must be a number, got {value!r}")
            value = float(value)
        elif isinstance(default, list):
            if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
                raise ValueError(f"[{name}].{key} must be a list of integers")
        elif isinstance(default, str) and not isinstance(value, str):
            raise ValueError(f"[{name}].{key} must be a string")
        kwargs[key] = value
    return cls(**kwargs)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(data) - set(_SECTIONS) - {"seed"})
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(unknown)}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValueError("seed must be an integer")
    sections = {name: _coerce(cls, name, data.get(name, {})) for name, cls in _SECTIONS.items()}
    cfg = RunConfig(seed=seed, **sections)
    cfg.make_schedule()  # validates bounds
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(json.load(fh))


# ---------------------------------------------------------------- csv

def _fmt(v) -> str:
    return repr(float(v))


def weights_csv(s: NoiseSchedule, scheme: WeightingScheme) -> str:
    w = weight_curve(scheme, s)
    lines = ["t,beta,alpha_bar,snr,weight"]
    for i in range(s.T):
        lines.append(f"{i + 1},{_fmt(s.beta[i])},{_fmt(s.alpha_bar[i])},{_fmt(s.snr[i])},{_fmt(w[i])}")
    return "\n".join(lines) + "\n"


def records_csv(records: list[TrainRecord]) -> str:
    lines = [",".join(TrainRecord.FIELDS)]
    for r in records:
        lines.append(f"{r.iteration},{_fmt(r.loss_diffusion)},{_fmt(r.loss_distill)},"
                     f"{_fmt(r.loss_aux)},{_fmt(r.loss_total)}")
    return "\n".join(lines) + "\n"


def points_csv(points, modes=None) -> str:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if modes is None:
        lines = ["x,y"] + [f"{_fmt(x)},{_fmt(y)}" for x, y in points]
    else:
        lines = ["x,y,mode"] + [f"{_fmt(x)},{_fmt(y)},{int(m)}" for (x, y), m in zip(points, modes)]
    return "\n".join(lines) + "\n"


def parse_points_csv(text: str) -> tuple[np.ndarray, np.ndarray | None]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise CsvFormatError("row 1: missing header")
    header = [h.strip() for h in rows[0]]
    if header not in (["x", "y"], ["x", "y", "mode"]):
        raise CsvFormatError(f"row 1: expected header 'x,y' or 'x,y,mode', got {','.join(header)!r}")
    has_mode = len(header) == 3
    pts, modes = [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"row {i}: expected {len(header)} fields, got {len(row)}")
        try:
            pts.append((float(row[0]), float(row[1])))
            if has_mode:
                modes.append(int(row[2]))
        except ValueError as exc:
            raise CsvFormatError(f"row {i}: {exc}") from exc
    arr = np.array(pts, dtype=np.float64).reshape(-1, 2)
    return arr, (np.array(modes, dtype=np.int64) if has_mode else None)


def write_text(path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


# ---------------------------------------------------------------- svg

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def svg_scatter(points, modes=None, size: int = 480, extent: float | None = None,
                title: str = "", point_radius: float = 1.6) -> str:
    """Standalone SVG scatter plot with axes through the origin."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if extent is None:
        extent = max(2.5, float(np.abs(points).max()) * 1.05) if len(points) else 2.5
    half = size / 2.0

    def px(v):
        return half + v / extent * (half - 10)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>',
           '<g class="axes" stroke="#444" stroke-width="1">',
           f'<line x1="10" y1="{half:.1f}" x2="{size - 10}" y2="{half:.1f}"/>',
           f'<line x1="{half:.1f}" y1="10" x2="{half:.1f}" y2="{size - 10}"/>',
           '</g>']
    if title:
        out.append(f'<text x="12" y="22" font-family="sans-serif" font-size="14">{title}</text>')
    groups = [(None, points)] if modes is None else [
        (int(m), points[np.asarray(modes) == m]) for m in np.unique(modes)]
    for m, pts in groups:
        color = "#333333" if m is None else PALETTE[m % len(PALETTE)]
        cls = "points" if m is None else f"mode-{m}"
        out.append(f'<g class="{cls}" fill="{color}">')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.2f}" cy="{size - px(y):.2f}" r="{point_radius}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg_scatter(csv_path, out_path, **style) -> None:
    with open(csv_path, encoding="utf-8", newline="") as fh:
        pts, modes = parse_points_csv(fh.read())
    write_text(out_path, svg_scatter(pts, modes, **style))
