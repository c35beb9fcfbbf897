"""Rigid in-plane shear estimation from trusted marker displacements."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .markers import MarkerState


class ShearEstimateError(ValueError):
    pass


@dataclass(frozen=True)
class ShearEstimate:
    dx_px: float
    dy_px: float
    dphi_deg: float
    n_markers_used: int
    residual_px: float  # RMS fit residual


def estimate(
    state: MarkerState,
    region: tuple[float, float, float, float] | None = None,
) -> ShearEstimate:
    """Closed-form 2-D orthogonal Procrustes fit about the marker centroid.

    region, when given, is (x0, y0, x1, y1) filtering markers by rest position.
    """
    keep = state.trust.copy()
    if region is not None:
        x0, y0, x1, y1 = region
        r = state.rest
        keep &= (r[:, 0] >= x0) & (r[:, 0] <= x1) & (r[:, 1] >= y0) & (r[:, 1] <= y1)
    rest = state.rest[keep]
    pos = state.pos[keep]
    n = len(rest)
    if n < 3:
        raise ShearEstimateError(f"only {n} trusted markers in region; need >= 3")
    c_rest = rest.mean(axis=0)
    c_pos = pos.mean(axis=0)
    r = rest - c_rest
    p = pos - c_pos
    # collinear rest positions leave rotation poorly constrained
    if np.linalg.matrix_rank(r, tol=1e-6 * max(1.0, np.abs(r).max())) < 2:
        raise ShearEstimateError("degenerate (collinear) marker configuration")
    num = float((r[:, 0] * p[:, 1] - r[:, 1] * p[:, 0]).sum())
    den = float((r * p).sum())
    phi = np.arctan2(num, den)
    cphi, sphi = np.cos(phi), np.sin(phi)
    rot = np.array([[cphi, -sphi], [sphi, cphi]])
    t = c_pos - c_rest
    fit = r @ rot.T + c_rest + t
    residual = float(np.sqrt(np.mean(np.sum((fit - pos) ** 2, axis=1))))
    return ShearEstimate(
        dx_px=float(t[0]),
        dy_px=float(t[1]),
        dphi_deg=float(np.rad2deg(phi)),
        n_markers_used=n,
        residual_px=residual,
    )
