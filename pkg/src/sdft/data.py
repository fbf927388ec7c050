"""Synthetic 2-D ring mixtures standing in for a diverse source domain and a
small, biased target domain.

Angle plays the role of a general attribute shared across domains; radius is
the domain-specific attribute that fine-tuning should change.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

FORMAT_HEADER = "SDFT-DATA"
FORMAT_VERSION = "v1"


class DatasetFormatError(ValueError):
    pass


@dataclass
class ToyDataset:
    points: np.ndarray       # (n, 2)
    mode_labels: np.ndarray  # (n,) int
    mode_table: np.ndarray   # (n_modes, 3): angle, radius, std
    domain_tag: str = "source"

    @property
    def n_modes(self) -> int:
        return len(self.mode_table)

    def centers(self) -> np.ndarray:
        ang, rad = self.mode_table[:, 0], self.mode_table[:, 1]
        return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)

    def subset_modes(self, keep) -> ToyDataset:
        keep = np.asarray(sorted(keep))
        mask = np.isin(self.mode_labels, keep)
        remap = {int(k): i for i, k in enumerate(keep)}
        labels = np.array([remap[int(l)] for l in self.mode_labels[mask]], dtype=np.int64)
        return ToyDataset(self.points[mask].copy(), labels, self.mode_table[keep].copy(),
                          self.domain_tag)


@dataclass(frozen=True)
class RingSpec:
    n_modes: int = 8
    radius: float = 1.0
    std: float = 0.05


def _sample_modes(mode_table: np.ndarray, n_points: int, rng) -> tuple[np.ndarray, np.ndarray]:
    n_modes = len(mode_table)
    # equal share per mode, the remainder spread over the first modes
    counts = np.full(n_modes, n_points // n_modes)
    counts[: n_points % n_modes] += 1
    labels = np.repeat(np.arange(n_modes), counts)
    ang, rad, std = (mode_table[labels, i] for i in range(3))
    centers = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    points = centers + rng.standard_normal((n_points, 2)) * std[:, None]
    return points, labels.astype(np.int64)


def ring_mode_table(n_modes: int, radius: float, std: float) -> np.ndarray:
    angles = 2.0 * math.pi * np.arange(n_modes) / n_modes
    return np.stack([angles, np.full(n_modes, float(radius)), np.full(n_modes, float(std))], axis=1)


def gen_ring(n_modes: int = 8, radius: float = 1.0, std: float = 0.05,
             n_points: int = 8000, seed: int = 0) -> ToyDataset:
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if not std > 0:
        raise ValueError("std must be > 0")
    if n_points < n_modes:
        raise ValueError(f"n_points ({n_points}) must be at least n_modes ({n_modes})")
    table = ring_mode_table(n_modes, radius, std)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xDA7A]))
    pts, labels = _sample_modes(table, n_points, rng)
    return ToyDataset(pts, labels, table, "source")


def gen_limited_target(source: RingSpec = RingSpec(), target_radius: float = 2.0,
                       keep_modes=(0, 1, 2), n_points: int = 600, seed: int = 1) -> ToyDataset:
    keep = sorted(set(int(k) for k in keep_modes))
    if not keep:
        raise ValueError("keep_modes must be nonempty")
    if keep[0] < 0 or keep[-1] >= source.n_modes:
        raise ValueError(f"keep_modes must index the {source.n_modes} source modes")
    if n_points < len(keep):
        raise ValueError("n_points must be at least the number of kept modes")
    full = ring_mode_table(source.n_modes, target_radius, source.std)
    table = full[keep]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x7A26]))
    pts, labels = _sample_modes(table, n_points, rng)
    return ToyDataset(pts, labels, table, "target")


def format_dataset(ds: ToyDataset) -> str:
    lines = [f"{FORMAT_HEADER} {FORMAT_VERSION}",
             f"domain {ds.domain_tag}",
             f"modes {ds.n_modes}",
             f"points {len(ds.points)}"]
    for i, (a, r, s) in enumerate(ds.mode_table):
        lines.append(f"mode {i} {a:.17g} {r:.17g} {s:.17g}")
    for (x, y), m in zip(ds.points, ds.mode_labels):
        lines.append(f"pt {x:.17g} {y:.17g} {int(m)}")
    return "\n".join(lines) + "\n"


def parse_dataset(text: str) -> ToyDataset:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def fail(lineno: int, msg: str):
        raise DatasetFormatError(f"line {lineno}: {msg}")

    if not lines:
        fail(1, "empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_HEADER:
        fail(1, f"expected header '{FORMAT_HEADER} {FORMAT_VERSION}', got {lines[0]!r}")
    if head[1] != FORMAT_VERSION:
        fail(1, f"unsupported dataset version {head[1]!r} (this reader understands {FORMAT_VERSION})")

    domain, n_modes, n_points = "source", None, None
    modes: list[tuple[float, float, float]] = []
    pts: list[tuple[float, float]] = []
    labels: list[int] = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            fail(lineno, "blank line")
        key = parts[0]
        try:
            if key == "domain" and len(parts) == 2:
                domain = parts[1]
            elif key == "modes" and len(parts) == 2:
                n_modes = int(parts[1])
            elif key == "points" and len(parts) == 2:
                n_points = int(parts[1])
            elif key == "mode" and len(parts) == 5:
                if int(parts[1]) != len(modes):
                    fail(lineno, f"mode index {parts[1]} out of order")
                modes.append((float(parts[2]), float(parts[3]), float(parts[4])))
            elif key == "pt" and len(parts) == 4:
                pts.append((float(parts[1]), float(parts[2])))
                labels.append(int(parts[3]))
            else:
                fail(lineno, f"malformed record {line!r}")
        except ValueError as exc:
            if isinstance(exc, DatasetFormatError):
                raise
            fail(lineno, f"cannot parse {line!r}: {exc}")

    last = len(lines)
    if n_modes is None or n_points is None:
        fail(last, "missing 'modes' or 'points' count line")
    if len(modes) != n_modes:
        fail(last, f"expected {n_modes} mode lines, found {len(modes)} (truncated?)")
    if len(pts) != n_points:
        fail(last, f"expected {n_points} points, found {len(pts)} (truncated?)")
    lab = np.array(labels, dtype=np.int64)
    if lab.size and (lab.min() < 0 or lab.max() >= n_modes):
        fail(last, "mode label out of range")
    return ToyDataset(np.array(pts, dtype=np.float64).reshape(-1, 2), lab,
                      np.array(modes, dtype=np.float64).reshape(-1, 3), domain)


def atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def save_dataset(ds: ToyDataset, path) -> None:
    atomic_write(path, format_dataset(ds).encode("ascii"))


def load_dataset(path) -> ToyDataset:
    with open(path, "r", encoding="ascii", newline="") as fh:
        return parse_dataset(fh.read())
