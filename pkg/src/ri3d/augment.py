"""Spatial augmentation: per-axis scaling, clipped jitter, then random zeroing."""

from dataclasses import asdict, dataclass

import numpy as np

from ri3d.geometry import as_cloud
from ri3d.rng import RngStream, partial_fisher_yates


@dataclass(frozen=True)
class S3daConfig:
    scale_low: float = 0.8
    scale_high: float = 1.2
    jitter_sigma: float = 0.01
    jitter_clip: float = 0.05
    zero_fraction: float = 0.05

    def __post_init__(self):
        if not 0 < self.scale_low <= self.scale_high:
            raise ValueError(f"need 0 < scale_low <= scale_high, got {self.scale_low}, {self.scale_high}")
        if self.jitter_sigma < 0 or self.jitter_clip < 0:
            raise ValueError("jitter_sigma and jitter_clip must be >= 0")
        if not 0 <= self.zero_fraction < 1:
            raise ValueError(f"zero_fraction must lie in [0, 1), got {self.zero_fraction}")

    def to_dict(self) -> dict:
        return asdict(self)


IDENTITY = S3daConfig(scale_low=1.0, scale_high=1.0, jitter_sigma=0.0, jitter_clip=0.0, zero_fraction=0.0)


def random_scale(points, rng: RngStream, cfg: S3daConfig) -> np.ndarray:
    """Scale about the raw origin with one uniform factor per axis (x, y, z draw order)."""
    pts = as_cloud(points)
    u = rng.uniform_array(3)
    factors = cfg.scale_low + (cfg.scale_high - cfg.scale_low) * u
    return pts * factors


def jitter(points, rng: RngStream, cfg: S3daConfig) -> np.ndarray:
    pts = as_cloud(points)
    noise = cfg.jitter_sigma * rng.gaussian_array(pts.size).reshape(pts.shape)
    return pts + np.clip(noise, -cfg.jitter_clip, cfg.jitter_clip)


def zero_indices(n: int, rng: RngStream, fraction: float) -> np.ndarray:
    return partial_fisher_yates(n, int(np.floor(fraction * n)), rng)


def zero_mask(points, rng: RngStream, cfg: S3daConfig) -> np.ndarray:
    pts = as_cloud(points).copy()
    pts[zero_indices(len(pts), rng, cfg.zero_fraction)] = 0.0
    return pts


def s3da(points, rng: RngStream, cfg: S3daConfig = S3daConfig()) -> np.ndarray:
    """Scale, jitter, then zero, all drawn from one shared stream."""
    return zero_mask(jitter(random_scale(points, rng, cfg), rng, cfg), rng, cfg)
