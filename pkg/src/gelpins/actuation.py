"""Sampling grid, pin targets, servo command encoding and the pin display model.

Pin extensions map linearly onto pulse widths: 0..3 mm <-> 1000..2000 us,
expressed in the controller's quarter-microsecond units.  Commands follow the
compact Set-Target framing (0x84) with an optional contiguous multi-target
variant (0x9F).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import map_coordinates

from .core import DepthMap

ROWS, COLS = 4, 6
N_PINS = ROWS * COLS
MAX_EXTENSION_MM = 3.0
PULSE_MIN_US = 1000.0
PULSE_MAX_US = 2000.0
PULSE_SAFETY_QUS = (2000, 10000)  # 500..2500 us hard bounds
SET_TARGET = 0x84
SET_MULTI_TARGET = 0x9F


class CommandRangeError(ValueError):
    pass


@dataclass
class SamplingGrid:
    """Steerable 6x4 lattice of depth-map sample coordinates."""

    center_px: tuple[float, float] = (160.0, 120.0)  # (x, y)
    spacing_px: float = 30.0
    rotation_deg: float = 0.0
    gain: float = 1.0

    def __post_init__(self):
        if self.spacing_px <= 0:
            raise ValueError("spacing must be positive")
        if self.gain <= 0:
            raise ValueError("gain must be positive")

    def points(self) -> np.ndarray:
        """(24, 2) sample coordinates as (x, y), row-major pin order."""
        cols = (np.arange(COLS) - (COLS - 1) / 2.0) * self.spacing_px
        rows = (np.arange(ROWS) - (ROWS - 1) / 2.0) * self.spacing_px
        gx, gy = np.meshgrid(cols, rows)  # row-major
        offs = np.stack([gx.ravel(), gy.ravel()], axis=1)
        a = np.deg2rad(self.rotation_deg)
        c, s = np.cos(a), np.sin(a)
        rot = np.array([[c, -s], [s, c]])
        return offs @ rot.T + np.asarray(self.center_px)


@dataclass
class PinTargets:
    extension_mm: np.ndarray  # (24,) in [0, 3]
    pulse_qus: np.ndarray  # (24,) int quarter-microseconds

    def __post_init__(self):
        self.extension_mm = np.asarray(self.extension_mm, dtype=float)
        self.pulse_qus = np.asarray(self.pulse_qus, dtype=int)
        if self.extension_mm.shape != (N_PINS,) or self.pulse_qus.shape != (N_PINS,):
            raise ValueError(f"targets must have {N_PINS} entries")
        if np.any(self.extension_mm < -1e-12) or np.any(
            self.extension_mm > MAX_EXTENSION_MM + 1e-12
        ):
            raise ValueError("extensions out of [0, 3] mm")


def sample(depth: DepthMap, grid: SamplingGrid) -> np.ndarray:
    """Bilinear depth samples at the 24 grid points, row-major pin order."""
    pts = grid.points()
    h, w = depth.shape
    out = (
        (pts[:, 0] < 0) | (pts[:, 0] > w - 1) | (pts[:, 1] < 0) | (pts[:, 1] > h - 1)
    )
    if out.any():
        raise ValueError(
            f"sampling grid outside frame bounds at points {np.where(out)[0].tolist()}"
        )
    return map_coordinates(depth.z, [pts[:, 1], pts[:, 0]], order=1, mode="nearest")


def extension_to_pulse_qus(extension_mm: np.ndarray | float) -> np.ndarray:
    span = PULSE_MAX_US - PULSE_MIN_US
    pulse_us = PULSE_MIN_US + span * np.asarray(extension_mm) / MAX_EXTENSION_MM
    return np.round(4.0 * pulse_us).astype(int)


def to_targets(depths: np.ndarray, gain: float = 1.0) -> PinTargets:
    """Gain-scaled, clamped pin extensions and their encoded pulse widths."""
    depths = np.asarray(depths, dtype=float)
    if not np.all(np.isfinite(depths)):
        raise ValueError("depths must be finite")
    ext = np.clip(gain * depths, 0.0, MAX_EXTENSION_MM)
    return PinTargets(extension_mm=ext, pulse_qus=extension_to_pulse_qus(ext))


def encode_command(channel: int, pulse_qus: int) -> bytes:
    """Compact Set-Target frame: 0x84, channel, low 7 bits, high 7 bits."""
    if not 0 <= channel < N_PINS:
        raise CommandRangeError(f"channel {channel} out of range 0..{N_PINS - 1}")
    lo, hi = PULSE_SAFETY_QUS
    if not lo <= pulse_qus <= hi:
        raise CommandRangeError(f"pulse {pulse_qus} qus outside safety bounds {lo}..{hi}")
    return bytes([SET_TARGET, channel, pulse_qus & 0x7F, (pulse_qus >> 7) & 0x7F])


def decode_command(frame: bytes) -> tuple[int, int]:
    """Inverse of encode_command; returns (channel, pulse_qus)."""
    if len(frame) != 4 or frame[0] != SET_TARGET:
        raise CommandRangeError(f"not a Set-Target frame: {frame.hex()}")
    return frame[1], frame[2] | (frame[3] << 7)


def encode_multi_command(first_channel: int, pulses_qus: np.ndarray) -> bytes:
    """Multi-target frame for >= 2 contiguous channels starting at first_channel."""
    pulses = np.asarray(pulses_qus, dtype=int)
    if len(pulses) < 2:
        raise CommandRangeError("multi-target needs >= 2 channels")
    if not 0 <= first_channel <= N_PINS - len(pulses):
        raise CommandRangeError(
            f"channels {first_channel}..{first_channel + len(pulses) - 1} out of range"
        )
    lo, hi = PULSE_SAFETY_QUS
    if np.any(pulses < lo) or np.any(pulses > hi):
        raise CommandRangeError("pulse outside safety bounds")
    payload = bytearray([SET_MULTI_TARGET, len(pulses), first_channel])
    for p in pulses:
        payload += bytes([int(p) & 0x7F, (int(p) >> 7) & 0x7F])
    return bytes(payload)


def encode_all(targets: PinTargets, channel_map: np.ndarray | None = None) -> bytes:
    """One Set-Target frame per pin, in channel order (deterministic)."""
    order = np.arange(N_PINS) if channel_map is None else np.asarray(channel_map)
    return b"".join(
        encode_command(int(ch), int(targets.pulse_qus[pin]))
        for pin, ch in enumerate(order)
    )


@dataclass
class PinDisplayModel:
    """Virtual pin display with slew-rate-limited motion."""

    extension_mm: np.ndarray = field(
        default_factory=lambda: np.zeros(N_PINS)
    )
    slew_mm_per_s: float = 15.0
    pitch_mm: float = 2.6
    footprint_mm: tuple[float, float] = (15.0, 10.0)

    def __post_init__(self):
        self.extension_mm = np.asarray(self.extension_mm, dtype=float)


def step_display(
    model: PinDisplayModel, targets: PinTargets, dt: float
) -> tuple[PinDisplayModel, np.ndarray]:
    """Advance every pin toward its target by at most slew * dt.

    Returns the new model and a per-pin settled flag.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    gap = targets.extension_mm - model.extension_mm
    step = np.clip(gap, -model.slew_mm_per_s * dt, model.slew_mm_per_s * dt)
    new_ext = np.clip(model.extension_mm + step, 0.0, MAX_EXTENSION_MM)
    settled = np.abs(targets.extension_mm - new_ext) < 1e-9
    return replace(model, extension_mm=new_ext), settled
