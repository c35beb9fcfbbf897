"""Marker grid tracking: mean-shift plus trust classification and correction.

Each tracked marker hill-climbs to the nearest density mode of a
background-suppressed inverted grayscale image.  Markers are then vetted
against three trust rules (dark-blob membership, displacement norm cap,
neighbour agreement) and untrusted displacements are re-interpolated from the
trusted set.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import griddata
from scipy.ndimage import center_of_mass, label

from .core import GelFrame
from .depthmap import marker_mask


class MarkerInitError(ValueError):
    def __init__(self, detected: int, expected: int):
        self.detected = detected
        self.expected = expected
        super().__init__(f"detected {detected} markers, expected {expected}")


class InsufficientTrustError(ValueError):
    pass


@dataclass(frozen=True)
class CorrectionThresholds:
    max_norm_px: float = 30.0  # displacement norm cap
    max_neighbor_diff_px: float = 15.0  # max disagreement with a grid neighbour
    kernel_radius_px: float = 9.0
    max_iters: int = 20
    eps_px: float = 0.1
    require_on_dark: bool = True  # trusted markers must sit on a dark blob

    def __post_init__(self):
        for name in ("max_norm_px", "max_neighbor_diff_px", "kernel_radius_px",
                     "max_iters", "eps_px"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class MarkerState:
    """Tracked marker grid; vec is derived so it can never desynchronize."""

    rest: np.ndarray  # (N, 2) as (x, y) px
    pos: np.ndarray  # (N, 2)
    trust: np.ndarray  # (N,) bool
    grid_shape: tuple[int, int]  # (rows, cols)

    def __post_init__(self):
        self.rest = np.asarray(self.rest, dtype=float)
        self.pos = np.asarray(self.pos, dtype=float)
        self.trust = np.asarray(self.trust, dtype=bool)

    @property
    def vec(self) -> np.ndarray:
        return self.pos - self.rest

    @property
    def n(self) -> int:
        return len(self.rest)


def init_markers(frame: GelFrame, rows: int, cols: int) -> MarkerState:
    """Detect rest markers as connected dark components, associate to a grid."""
    mask = marker_mask(frame)
    labels, count = label(mask)
    if count != rows * cols:
        raise MarkerInitError(count, rows * cols)
    centroids = center_of_mass(mask, labels, index=np.arange(1, count + 1))
    pts = np.array([(c, r) for r, c in centroids])  # (x, y)
    # sort into rows by y, then each row by x
    order = np.argsort(pts[:, 1])
    pts = pts[order]
    grid = np.empty_like(pts)
    for r in range(rows):
        row = pts[r * cols : (r + 1) * cols]
        grid[r * cols : (r + 1) * cols] = row[np.argsort(row[:, 0])]
    return MarkerState(
        rest=grid.copy(),
        pos=grid.copy(),
        trust=np.ones(rows * cols, dtype=bool),
        grid_shape=(rows, cols),
    )


def density_image(frame: GelFrame) -> np.ndarray:
    """Inverted grayscale with the background level subtracted.

    Markers are far darker than shading variation, so the median-based
    threshold leaves them as the dominant density modes.
    """
    gray = frame.gray()
    thresh = float(np.median(gray)) - 0.1
    return np.clip(thresh - gray, 0.0, None)


def _disk_offsets(radius: float) -> tuple[np.ndarray, np.ndarray]:
    r = int(np.ceil(radius))
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    keep = dx**2 + dy**2 <= radius**2
    return dx[keep], dy[keep]


def track(
    frame: GelFrame, prev: MarkerState, th: CorrectionThresholds = CorrectionThresholds()
) -> MarkerState:
    """Mean-shift every marker to its local density mode; trust untouched."""
    weights = density_image(frame)
    h, w = weights.shape
    dx, dy = _disk_offsets(th.kernel_radius_px)
    pos = prev.pos.copy()
    active = np.ones(prev.n, dtype=bool)
    for _ in range(th.max_iters):
        if not active.any():
            break
        cx = np.round(pos[active, 0]).astype(int)
        cy = np.round(pos[active, 1]).astype(int)
        xs = np.clip(cx[:, None] + dx[None, :], 0, w - 1)
        ys = np.clip(cy[:, None] + dy[None, :], 0, h - 1)
        wgt = weights[ys, xs]
        total = wgt.sum(axis=1)
        ok = total > 1e-12
        new = pos[active].copy()
        new[ok, 0] = (wgt * xs)[ok].sum(axis=1) / total[ok]
        new[ok, 1] = (wgt * ys)[ok].sum(axis=1) / total[ok]
        step = np.linalg.norm(new - pos[active], axis=1)
        pos[active] = new
        idx = np.where(active)[0]
        active[idx[(step < th.eps_px) | ~ok]] = False
    return replace(prev, pos=pos, rest=prev.rest.copy(), trust=prev.trust.copy())


def correct(
    state: MarkerState,
    mask: np.ndarray,
    th: CorrectionThresholds = CorrectionThresholds(),
) -> MarkerState:
    """Classify marker trust and re-interpolate untrusted displacements.

    Trust fails if the marker is off any dark blob (polarity configurable),
    its displacement norm exceeds the cap, or it disagrees with a 4-connected
    grid neighbour by more than the neighbour threshold.
    """
    rows, cols = state.grid_shape
    vec = state.vec
    trust = np.ones(state.n, dtype=bool)

    if th.require_on_dark:
        h, w = mask.shape
        px = np.clip(np.round(state.pos[:, 0]).astype(int), 0, w - 1)
        py = np.clip(np.round(state.pos[:, 1]).astype(int), 0, h - 1)
        trust &= mask[py, px]
    else:
        h, w = mask.shape
        px = np.clip(np.round(state.pos[:, 0]).astype(int), 0, w - 1)
        py = np.clip(np.round(state.pos[:, 1]).astype(int), 0, h - 1)
        trust &= ~mask[py, px]

    trust &= np.linalg.norm(vec, axis=1) <= th.max_norm_px

    grid_vec = vec.reshape(rows, cols, 2)
    neighbor_bad = np.zeros((rows, cols), dtype=bool)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        diff = np.linalg.norm(grid_vec - np.roll(grid_vec, shift, axis=axis), axis=2)
        # roll wraps around; invalidate the wrapped edge
        sl = [slice(None), slice(None)]
        sl[axis] = 0 if shift == 1 else -1
        diff[tuple(sl)] = 0.0
        neighbor_bad |= diff > th.max_neighbor_diff_px
    trust &= ~neighbor_bad.ravel()

    n_trusted = int(trust.sum())
    if n_trusted < 3:
        raise InsufficientTrustError(
            f"only {n_trusted} trusted markers; need >= 3 to interpolate"
        )
    new_vec = vec.copy()
    if not trust.all():
        rr, cc = np.mgrid[0:rows, 0:cols]
        coords = np.stack([rr.ravel(), cc.ravel()], axis=1).astype(float)
        interp = griddata(coords[trust], vec[trust], coords[~trust], method="linear")
        nn = griddata(coords[trust], vec[trust], coords[~trust], method="nearest")
        hole = np.isnan(interp[:, 0])
        interp[hole] = nn[hole]
        new_vec[~trust] = interp
    return MarkerState(
        rest=state.rest.copy(),
        pos=state.rest + new_vec,
        trust=trust,
        grid_shape=state.grid_shape,
    )
