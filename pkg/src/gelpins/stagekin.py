"""Compliant-stage kinematics.

The stage pose (x, y, phi) is modelled as a sum of per-tab polynomials of the
normalized servo angles, fitted by constrained least squares (p(0) = 0).
Inverse kinematics is a damped Newton iteration on the analytic Jacobian.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_TABS = 3
COMPONENTS = ("x", "y", "phi")


class StageFitError(ValueError):
    pass


class WorkspaceError(RuntimeError):
    """Target pose not reachable; carries the best attempt."""

    def __init__(self, message: str, result: "IkResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class TabAngles:
    theta: tuple[float, float, float]

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float)
        if t.shape != (3,):
            raise ValueError("need exactly 3 tab angles")
        if np.any(np.abs(t) > 1 + 1e-12):
            raise ValueError(f"tab angles must lie in [-1, 1], got {self.theta}")
        object.__setattr__(self, "theta", tuple(float(v) for v in t))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)


@dataclass(frozen=True)
class StagePose:
    x_mm: float
    y_mm: float
    phi_deg: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x_mm, self.y_mm, self.phi_deg])):
            raise ValueError("pose components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x_mm, self.y_mm, self.phi_deg])


@dataclass
class StageCalibration:
    """coeffs[component, tab, power], ascending powers, constant term zero."""

    degree: int
    coeffs: np.ndarray  # (3, 3, degree + 1)
    provenance: str = "measured"
    residuals: np.ndarray | None = None  # (3, 3) RMS fit residual per polynomial

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (3, N_TABS, self.degree + 1):
            raise ValueError(f"coeffs shape {self.coeffs.shape} inconsistent")
        if np.any(np.abs(self.coeffs[:, :, 0]) > 1e-12):
            raise ValueError("constant terms must be zero (neutral pose at theta=0)")

    def save(self, path: str | Path) -> None:
        doc = {
            "degree": self.degree,
            "provenance": self.provenance,
            "coefficients": {
                f"p_{comp}{tab + 1}": self.coeffs[ci, tab].tolist()
                for ci, comp in enumerate(COMPONENTS)
                for tab in range(N_TABS)
            },
            "fit_residuals": None
            if self.residuals is None
            else self.residuals.tolist(),
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "StageCalibration":
        doc = json.loads(Path(path).read_text())
        degree = doc["degree"]
        coeffs = np.zeros((3, N_TABS, degree + 1))
        for ci, comp in enumerate(COMPONENTS):
            for tab in range(N_TABS):
                coeffs[ci, tab] = doc["coefficients"][f"p_{comp}{tab + 1}"]
        res = doc.get("fit_residuals")
        return cls(
            degree=degree,
            coeffs=coeffs,
            provenance=doc.get("provenance", "measured"),
            residuals=None if res is None else np.asarray(res),
        )


def fit(
    samples: list[tuple[TabAngles, StagePose]], degree: int
) -> StageCalibration:
    """Least-squares per-tab polynomial fit with p(0) = 0.

    Samples must actuate one tab at a time (superposition assumption).
    """
    if degree < 1:
        raise StageFitError("degree must be >= 1")
    by_tab: dict[int, list[tuple[float, np.ndarray]]] = {t: [] for t in range(N_TABS)}
    for angles, pose in samples:
        t = angles.as_array()
        active = np.where(np.abs(t) > 1e-12)[0]
        if len(active) > 1:
            raise StageFitError(f"sample {angles} activates more than one tab")
        tab = int(active[0]) if len(active) else 0
        by_tab[tab].append((t[tab] if len(active) else 0.0, pose.as_array()))
    coeffs = np.zeros((3, N_TABS, degree + 1))
    residuals = np.zeros((3, N_TABS))
    for tab in range(N_TABS):
        pts = by_tab[tab]
        if len(pts) < degree + 1:
            raise StageFitError(
                f"tab {tab}: {len(pts)} samples, need >= {degree + 1} for degree {degree}"
            )
        theta = np.array([p[0] for p in pts])
        poses = np.array([p[1] for p in pts])  # (k, 3)
        design = np.stack([theta**d for d in range(1, degree + 1)], axis=1)
        if np.linalg.matrix_rank(design) < degree:
            raise StageFitError(f"tab {tab}: rank-deficient design matrix")
        sol, _, _, _ = np.linalg.lstsq(design, poses, rcond=None)  # (degree, 3)
        coeffs[:, tab, 1:] = sol.T
        fitted = design @ sol
        residuals[:, tab] = np.sqrt(np.mean((fitted - poses) ** 2, axis=0))
    return StageCalibration(degree=degree, coeffs=coeffs, residuals=residuals)


def forward(theta: TabAngles, cal: StageCalibration) -> StagePose:
    """Componentwise sum of per-tab polynomial contributions."""
    t = theta.as_array()
    powers = np.stack([t**d for d in range(cal.degree + 1)], axis=1)  # (3, deg+1)
    pose = np.einsum("ctd,td->c", cal.coeffs, powers)
    return StagePose(x_mm=pose[0], y_mm=pose[1], phi_deg=pose[2])


def jacobian(theta: TabAngles, cal: StageCalibration) -> np.ndarray:
    """J[i][j] = d pose_i / d theta_j, via analytic polynomial derivatives."""
    t = theta.as_array()
    d = np.arange(1, cal.degree + 1)
    dpow = d[None, :] * np.stack([t**(k - 1) for k in d], axis=1)  # (3, degree)
    return np.einsum("ctd,td->ct", cal.coeffs[:, :, 1:], dpow)


@dataclass(frozen=True)
class IkResult:
    theta: TabAngles
    pose: StagePose
    err_trans_mm: float
    err_rot_deg: float
    iterations: int
    converged: bool


# convergence and acceptance tolerances
IK_TOL_TRANS_MM = 0.01
IK_TOL_ROT_DEG = 0.05
IK_MAX_ERR_TRANS_MM = 0.1
IK_MAX_ERR_ROT_DEG = 0.5


def solve_ik(
    target: StagePose,
    cal: StageCalibration,
    seed: TabAngles = TabAngles((0.0, 0.0, 0.0)),
    damping: float = 1e-3,
    max_iters: int = 100,
) -> IkResult:
    """Damped Newton iteration, angles clamped into [-1, 1] each step."""
    t = np.clip(seed.as_array(), -1.0, 1.0)
    tgt = target.as_array()
    best = None
    for it in range(max_iters + 1):
        pose = forward(TabAngles(tuple(t)), cal).as_array()
        err = tgt - pose
        e_trans = float(np.hypot(err[0], err[1]))
        e_rot = float(abs(err[2]))
        if best is None or (e_trans + e_rot / 10.0) < (
            best[1] + best[2] / 10.0
        ):
            best = (t.copy(), e_trans, e_rot, it)
        if e_trans < IK_TOL_TRANS_MM and e_rot < IK_TOL_ROT_DEG:
            result = IkResult(
                theta=TabAngles(tuple(t)),
                pose=StagePose(*pose),
                err_trans_mm=e_trans,
                err_rot_deg=e_rot,
                iterations=it,
                converged=True,
            )
            return result
        if it == max_iters:
            break
        jac = jacobian(TabAngles(tuple(t)), cal)
        step = np.linalg.solve(jac.T @ jac + damping * np.eye(3), jac.T @ err)
        t = np.clip(t + step, -1.0, 1.0)
    bt, e_trans, e_rot, it = best
    bpose = forward(TabAngles(tuple(bt)), cal)
    result = IkResult(
        theta=TabAngles(tuple(bt)),
        pose=bpose,
        err_trans_mm=e_trans,
        err_rot_deg=e_rot,
        iterations=max_iters,
        converged=e_trans < IK_MAX_ERR_TRANS_MM and e_rot < IK_MAX_ERR_ROT_DEG,
    )
    if not result.converged:
        raise WorkspaceError(
            f"target {target} unreachable: residual {e_trans:.3f} mm / {e_rot:.3f} deg",
            result,
        )
    return result


def reference_calibration() -> StageCalibration:
    """Synthetic reference: three tabs at 120 degree symmetry, cubic per tab.

    Per-tab lateral reach ~0.7 mm along the tab direction and ~5 deg of
    rotation at full actuation, so the combined workspace covers at least
    1 mm of lateral motion in any direction and 10 degrees of rotation.
    """
    degree = 3
    lateral = np.array([0.0, 0.55, 0.0, 0.15])  # mm vs theta
    rotation = np.array([0.0, 4.0, 0.0, 1.0])  # deg vs theta
    coeffs = np.zeros((3, N_TABS, degree + 1))
    for tab, az_deg in enumerate((90.0, 210.0, 330.0)):
        az = np.deg2rad(az_deg)
        coeffs[0, tab] = np.cos(az) * lateral
        coeffs[1, tab] = np.sin(az) * lateral
        coeffs[2, tab] = rotation
    return StageCalibration(
        degree=degree, coeffs=coeffs, provenance="synthetic-reference"
    )
