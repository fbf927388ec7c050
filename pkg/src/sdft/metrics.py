"""Point-cloud metrics: mode coverage, RBF-kernel MMD, translation
faithfulness and cross-model alignment."""
from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.spatial.distance import cdist, pdist

ORIGIN_EPS = 1e-9
MIN_HITS = 5


def mode_centers(mode_table: np.ndarray) -> np.ndarray:
    mode_table = np.asarray(mode_table, dtype=np.float64)
    ang, rad = mode_table[:, 0], mode_table[:, 1]
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def mode_coverage(samples, mode_table, capture_radius: float,
                  min_hits: int = MIN_HITS) -> tuple[float, np.ndarray]:
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if len(samples) == 0:
        raise ValueError("mode_coverage: empty sample set")
    if capture_radius < 0:
        raise ValueError("capture_radius must be >= 0")
    d = cdist(samples, mode_centers(mode_table))
    counts = (d < capture_radius).sum(axis=0)
    return float(np.mean(counts >= min_hits)), counts


def angular_coverage(samples, mode_angles, capture_angle: float,
                     min_hits: int = MIN_HITS) -> tuple[float, np.ndarray]:
    """Coverage judged on angle alone: a mode is hit when at least ``min_hits``
    samples lie within ``capture_angle`` radians of its direction."""
    ang, keep = angles(samples)
    if keep.sum() == 0:
        raise ValueError("angular_coverage: no samples away from the origin")
    diff = wrap_angle(ang[keep][:, None] - np.asarray(mode_angles, dtype=np.float64)[None, :])
    counts = (diff < capture_angle).sum(axis=0)
    return float(np.mean(counts >= min_hits)), counts


def median_bandwidth(a, b=None) -> float:
    pts = np.asarray(a, dtype=np.float64) if b is None else np.vstack([a, b])
    d = pdist(pts)
    bw = float(np.median(d[d > 0])) if np.any(d > 0) else 1.0
    return bw


def mmd_rbf_raw(a, b, bandwidth: float) -> float:
    """Unbiased MMD^2 with k(x, y) = exp(-|x - y|^2 / (2 h^2)); may be negative."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = len(a), len(b)
    if m < 2 or n < 2:
        raise ValueError("mmd_rbf needs at least two points per set")
    g = -0.5 / bandwidth ** 2
    kaa = np.exp(g * cdist(a, a, "sqeuclidean"))
    kbb = np.exp(g * cdist(b, b, "sqeuclidean"))
    kab = np.exp(g * cdist(a, b, "sqeuclidean"))
    saa = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    sbb = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(saa + sbb - 2.0 * kab.mean())


def mmd_rbf(a, b, bandwidth: float | None = None) -> float:
    if bandwidth is None:
        bandwidth = median_bandwidth(a, b)
    return max(0.0, mmd_rbf_raw(a, b, bandwidth))


def wrap_angle(d):
    """Absolute angular difference folded into [0, pi]."""
    d = np.abs(np.remainder(np.asarray(d, dtype=np.float64), 2.0 * np.pi))
    return np.minimum(d, 2.0 * np.pi - d)


def angles(points) -> tuple[np.ndarray, np.ndarray]:
    """Polar angle of each point and the mask of points usable for angles."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    keep = np.hypot(p[:, 0], p[:, 1]) > ORIGIN_EPS
    return np.arctan2(p[:, 1], p[:, 0]), keep


def _paired(a, b, name: str):
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(a) != len(b):
        raise ValueError(f"{name}: paired sets have different lengths {len(a)} and {len(b)}")
    if len(a) == 0:
        raise ValueError(f"{name}: empty input")
    return a, b


def angular_distances(a, b) -> tuple[np.ndarray, int]:
    """Wrapped angle differences for pairs where neither point sits at the origin,
    plus the number of excluded pairs."""
    a, b = _paired(a, b, "angular_distances")
    ang_a, ka = angles(a)
    ang_b, kb = angles(b)
    keep = ka & kb
    return wrap_angle(ang_a[keep] - ang_b[keep]), int((~keep).sum())


def faithfulness(inputs, translations) -> tuple[float, float]:
    """(median |angle change|, median radius change) over input/output pairs."""
    a, b = _paired(inputs, translations, "faithfulness")
    dang, _ = angular_distances(a, b)
    drad = np.hypot(b[:, 0], b[:, 1]) - np.hypot(a[:, 0], a[:, 1])
    angle_med = float(np.median(dang)) if dang.size else float("nan")
    return angle_med, float(np.median(drad))


def alignment(src_points, trg_points) -> float:
    dang, _ = angular_distances(src_points, trg_points)
    if dang.size == 0:
        raise ValueError("alignment: every pair sits at the origin")
    return float(np.median(dang))


@dataclass
class MetricReport:
    coverage: float = float("nan")
    per_mode_counts: list[int] = field(default_factory=list)
    mmd: float = float("nan")
    faithfulness_angle_median: float = float("nan")
    faithfulness_radius_median: float = float("nan")
    alignment_median: float = float("nan")
    min_hits: int = MIN_HITS

    def __post_init__(self):
        if not np.isnan(self.coverage) and not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        if not np.isnan(self.mmd) and self.mmd < 0:
            raise ValueError("mmd must be >= 0")

    def to_csv(self) -> str:
        names = [f.name for f in fields(self)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        row = []
        for n in names:
            v = getattr(self, n)
            row.append(" ".join(str(int(c)) for c in v) if n == "per_mode_counts" else repr(v))
        w.writerow(row)
        return buf.getvalue()

    def to_text(self) -> str:
        lines = ["metric report", f"  min_hits: {self.min_hits}"]
        for f in fields(self):
            if f.name == "min_hits":
                continue
            v = getattr(self, f.name)
            if isinstance(v, float) and np.isnan(v):
                continue
            if f.name == "per_mode_counts":
                if not v:
                    continue
                v = " ".join(str(int(c)) for c in v)
            elif isinstance(v, float):
                v = f"{v:.6g}"
            lines.append(f"  {f.name}: {v}")
        return "\n".join(lines) + "\n"
