"""Shared sensor geometry and frame/depth containers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sensing geometry: 240 x 320 px over an 18 x 24 mm area.
FRAME_HEIGHT = 240
FRAME_WIDTH = 320
MM_PER_PX = 18.0 / 240.0  # 0.075 mm/px, identical along both axes
GEL_THICKNESS_MM = 3.0


@dataclass(frozen=True)
class SensorGeometry:
    height: int = FRAME_HEIGHT
    width: int = FRAME_WIDTH
    mm_per_px: float = MM_PER_PX
    thickness_mm: float = GEL_THICKNESS_MM
    smoothing_sigma_px: float = 4.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)


@dataclass
class DepthMap:
    """Per-pixel height field z(x, y) in mm."""

    z: np.ndarray  # (H, W) float
    mm_per_px: float = MM_PER_PX

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {self.z.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.z.shape

    def peak(self) -> float:
        return float(self.z.max())


@dataclass
class FrameTruth:
    """Ground-truth annotations carried by synthetic frames."""

    depth: DepthMap | None = None
    shear: tuple[float, float, float] | None = None  # (dx_px, dy_px, dphi_deg)
    marker_rest: np.ndarray | None = None  # (N, 2) as (x, y) px
    marker_pos: np.ndarray | None = None  # (N, 2) as (x, y) px


@dataclass
class GelFrame:
    """RGB tactile image, intensities in [0, 1]."""

    pixels: np.ndarray  # (H, W, 3) float
    mm_per_px: float = MM_PER_PX
    truth: FrameTruth | None = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"frame must be (H, W, 3), got {self.pixels.shape}")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < -1e-9 or hi > 1 + 1e-9:
            raise ValueError(f"intensities out of [0, 1]: [{lo}, {hi}]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    def gray(self) -> np.ndarray:
        return self.pixels.mean(axis=2)
