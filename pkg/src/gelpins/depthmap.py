"""Depth reconstruction: color-to-gradient lookup, masking and Poisson integration.

The color-to-gradient mapping is a binned RGB lookup table calibrated on
presses of spheres with known geometry; gradients are spatially integrated by
a discrete sine transform Poisson solve with z = 0 on the frame border.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dstn, idstn
from scipy.ndimage import distance_transform_edt, uniform_filter

from .core import DepthMap, GelFrame

LUT_MAGIC = b"FGLUT1"


class CalibrationError(ValueError):
    pass


@dataclass
class GradientLUT:
    """Binned RGB -> mean (Gx, Gy) surface gradient, mm/mm."""

    bins: int
    table: np.ndarray  # (B, B, B, 2) float32, every bin filled
    coverage: np.ndarray  # (B, B, B) int32 sample counts

    def lookup(self, pixels: np.ndarray) -> np.ndarray:
        """Vectorized lookup; pixels (..., 3) in [0, 1] -> gradients (..., 2)."""
        idx = np.minimum((pixels * self.bins).astype(int), self.bins - 1)
        return self.table[idx[..., 0], idx[..., 1], idx[..., 2]].astype(float)

    def populated_bins(self) -> int:
        return int((self.coverage > 0).sum())

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(LUT_MAGIC)
            fh.write(struct.pack("<III", self.bins, self.bins, self.bins))
            fh.write(self.table.astype("<f4").tobytes())
            fh.write(self.coverage.astype("<u4").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "GradientLUT":
        raw = Path(path).read_bytes()
        if raw[:6] != LUT_MAGIC:
            raise CalibrationError(f"{path}: bad magic {raw[:6]!r}")
        b0, b1, b2 = struct.unpack("<III", raw[6:18])
        if not (b0 == b1 == b2):
            raise CalibrationError(f"{path}: non-cubic bin counts {b0}x{b1}x{b2}")
        n = b0 * b1 * b2
        table = np.frombuffer(raw[18 : 18 + 8 * n], dtype="<f4").reshape(b0, b1, b2, 2)
        coverage = np.frombuffer(raw[18 + 8 * n : 18 + 12 * n], dtype="<u4").reshape(
            b0, b1, b2
        )
        return cls(bins=b0, table=table.copy(), coverage=coverage.astype(np.int32))


@dataclass
class GradientField:
    """Per-pixel surface slope (mm/mm) with a validity mask."""

    gx: np.ndarray
    gy: np.ndarray
    valid: np.ndarray  # bool, False where masked out

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape


def marker_mask(
    frame: GelFrame, window_px: int = 31, offset: float = 0.05
) -> np.ndarray:
    """Adaptive threshold of the grayscale image; True where locally dark."""
    gray = frame.gray()
    local_mean = uniform_filter(gray, size=window_px, mode="nearest")
    return gray < local_mean - offset


def truth_gradients(depth: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradients of a truth depth field, mm/mm."""
    gy, gx = np.gradient(depth.z, depth.mm_per_px)
    return gx, gy


def calibrate(
    frames: list[GelFrame],
    bins: int = 32,
    exclude_markers: bool = True,
) -> GradientLUT:
    """Build the RGB -> gradient table from frames with known truth depth.

    Unpopulated bins are filled from their nearest populated bin so lookups
    are total.
    """
    if not frames:
        raise CalibrationError("no calibration frames given")
    sums = np.zeros((bins, bins, bins, 2))
    counts = np.zeros((bins, bins, bins), dtype=np.int64)
    for k, frame in enumerate(frames):
        if frame.truth is None or frame.truth.depth is None:
            raise CalibrationError(f"calibration frame {k} lacks truth depth")
        gx, gy = truth_gradients(frame.truth.depth)
        keep = np.ones(frame.shape, dtype=bool)
        if exclude_markers:
            keep &= ~marker_mask(frame)
        idx = np.minimum((frame.pixels * bins).astype(int), bins - 1)
        flat = (idx[..., 0] * bins + idx[..., 1]) * bins + idx[..., 2]
        flat = flat[keep]
        g = np.stack([gx[keep], gy[keep]], axis=1)
        np.add.at(sums.reshape(-1, 2), flat, g)
        np.add.at(counts.reshape(-1), flat, 1)
    populated = counts > 0
    if not populated.any():
        raise CalibrationError("calibration produced no populated bins")
    table = np.zeros_like(sums)
    table[populated] = sums[populated] / counts[populated, None]
    # serve empty bins from their nearest populated neighbour in RGB-bin space
    _, nearest = distance_transform_edt(~populated, return_indices=True)
    table = table[nearest[0], nearest[1], nearest[2]]
    return GradientLUT(
        bins=bins, table=table.astype(np.float32), coverage=counts.astype(np.int32)
    )


def inpaint_invalid(
    gx: np.ndarray, gy: np.ndarray, valid: np.ndarray, max_passes: int = 50
) -> tuple[np.ndarray, np.ndarray]:
    """Fill invalid pixels by repeated 3x3 averages of valid neighbours."""
    gx, gy, valid = gx.copy(), gy.copy(), valid.copy()
    gx[~valid] = 0.0
    gy[~valid] = 0.0
    for _ in range(max_passes):
        if valid.all():
            break
        counts = uniform_filter(valid.astype(float), size=3, mode="constant") * 9.0
        sx = uniform_filter(gx * valid, size=3, mode="constant") * 9.0
        sy = uniform_filter(gy * valid, size=3, mode="constant") * 9.0
        grow = (~valid) & (counts > 0.5)
        gx[grow] = sx[grow] / counts[grow]
        gy[grow] = sy[grow] / counts[grow]
        valid |= grow
    return gx, gy


def infer_gradients(
    frame: GelFrame,
    lut: GradientLUT,
    mask: np.ndarray | None = None,
) -> GradientField:
    """Per-pixel LUT lookup; masked pixels are invalidated and inpainted."""
    if mask is not None and mask.shape != frame.shape:
        raise ValueError(f"mask shape {mask.shape} != frame shape {frame.shape}")
    g = lut.lookup(frame.pixels)
    valid = np.ones(frame.shape, dtype=bool) if mask is None else ~mask
    gx, gy = g[..., 0], g[..., 1]
    if not valid.all():
        gx, gy = inpaint_invalid(gx, gy, valid)
    return GradientField(gx=gx, gy=gy, valid=valid)


def integrate(
    grad: GradientField, mm_per_px: float, shift_min_to_zero: bool = True
) -> DepthMap:
    """Spectral Poisson integration of a gradient field.

    Solves the discrete 5-point Poisson equation with homogeneous Dirichlet
    boundary (the gel is clamped at the frame edge) via DST-I; O(HW log HW).
    """
    if not (np.isfinite(grad.gx).all() and np.isfinite(grad.gy).all()):
        raise ValueError("gradient field contains non-finite values")
    h = mm_per_px
    div = np.gradient(grad.gx, h, axis=1) + np.gradient(grad.gy, h, axis=0)
    f = div[1:-1, 1:-1]
    m, n = f.shape
    fhat = dstn(f, type=1)
    i = np.arange(1, m + 1)
    j = np.arange(1, n + 1)
    lam_i = (2.0 * np.cos(np.pi * i / (m + 1)) - 2.0) / h**2
    lam_j = (2.0 * np.cos(np.pi * j / (n + 1)) - 2.0) / h**2
    denom = lam_i[:, None] + lam_j[None, :]
    zhat = fhat / denom
    z = np.zeros(grad.shape)
    z[1:-1, 1:-1] = idstn(zhat, type=1)
    if shift_min_to_zero:
        z -= z.min()
    return DepthMap(z=z, mm_per_px=mm_per_px)


def reconstruct(
    frame: GelFrame, lut: GradientLUT, mask: np.ndarray | None = None
) -> DepthMap:
    """Convenience: mask -> gradients -> Poisson integration."""
    if mask is None:
        mask = marker_mask(frame)
    grad = infer_gradients(frame, lut, mask)
    return integrate(grad, frame.mm_per_px)
