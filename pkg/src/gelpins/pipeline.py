"""Per-frame processing loop: frame -> depth + markers -> shear -> commands."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import actuation, depthmap, shear, stagekin
from .actuation import PinDisplayModel, PinTargets, SamplingGrid
from .core import GelFrame, MM_PER_PX
from .markers import CorrectionThresholds, MarkerState, correct, init_markers, track
from .stagekin import StageCalibration, StagePose, TabAngles, WorkspaceError


@dataclass
class PipelineConfig:
    source: str = "sphere_press"  # scenario name or sequence directory
    lut_path: str | None = None
    stage_cal_path: str | None = None
    thresholds: CorrectionThresholds = field(default_factory=CorrectionThresholds)
    grid: SamplingGrid = field(default_factory=SamplingGrid)
    tick_budget_ms: float = 125.0
    stream_port: int = 8765
    follow_shear: bool = False  # grid centre tracks shear translation
    marker_rows: int = 8
    marker_cols: int = 10
    debug_trust_path: str | None = None

    def __post_init__(self):
        if self.tick_budget_ms <= 0:
            raise ValueError("tick budget must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        doc = json.loads(Path(path).read_text())
        kwargs = dict(doc)
        if "thresholds" in doc:
            kwargs["thresholds"] = CorrectionThresholds(**doc["thresholds"])
        if "grid" in doc:
            g = dict(doc["grid"])
            if "center_px" in g:
                g["center_px"] = tuple(g["center_px"])
            kwargs["grid"] = SamplingGrid(**g)
        cfg = cls(**kwargs)
        for name in ("lut_path", "stage_cal_path"):
            p = getattr(cfg, name)
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{name}: {p} does not exist")
        return cfg


@dataclass
class PipelineState:
    frame_index: int
    degraded: bool = False
    error: str | None = None
    warnings: list[str] = field(default_factory=list)
    depth_small: np.ndarray | None = None  # downsampled for streaming
    depth_peak_mm: float = 0.0
    marker_rest: np.ndarray | None = None
    marker_pos: np.ndarray | None = None
    marker_trust: np.ndarray | None = None
    shear_est: shear.ShearEstimate | None = None
    sampled_mm: np.ndarray | None = None  # (24,) row-major
    targets: PinTargets | None = None
    theta: TabAngles | None = None
    pose: StagePose | None = None
    display_mm: np.ndarray | None = None
    grid: SamplingGrid | None = None
    command_bytes: bytes = b""
    timings_ms: dict[str, float] = field(default_factory=dict)

    def snapshot(self) -> dict:
        """JSON-safe snapshot for the operator stream (schema version 1)."""

        def arr(a, nd=3):
            return None if a is None else np.round(np.asarray(a, float), nd).tolist()

        return {
            "schema_version": 1,
            "frame_index": self.frame_index,
            "degraded": self.degraded,
            "error": self.error,
            "warnings": list(self.warnings),
            "depth": {
                "peak_mm": round(self.depth_peak_mm, 4),
                "small": arr(self.depth_small),
            },
            "markers": {
                "rest": arr(self.marker_rest, 2),
                "pos": arr(self.marker_pos, 2),
                "trust": None
                if self.marker_trust is None
                else self.marker_trust.astype(bool).tolist(),
            },
            "shear": None
            if self.shear_est is None
            else {
                "dx_px": round(self.shear_est.dx_px, 3),
                "dy_px": round(self.shear_est.dy_px, 3),
                "dphi_deg": round(self.shear_est.dphi_deg, 3),
                "residual_px": round(self.shear_est.residual_px, 3),
                "n_markers": self.shear_est.n_markers_used,
            },
            "sampled_mm": arr(self.sampled_mm),
            "targets": None
            if self.targets is None
            else {
                "extension_mm": arr(self.targets.extension_mm),
                "pulse_qus": self.targets.pulse_qus.tolist(),
            },
            "display_mm": arr(self.display_mm),
            "stage": None
            if self.theta is None
            else {
                "theta": arr(self.theta.as_array()),
                "pose": arr(self.pose.as_array()) if self.pose else None,
            },
            "grid": None
            if self.grid is None
            else {
                "center_px": list(self.grid.center_px),
                "spacing_px": self.grid.spacing_px,
                "rotation_deg": self.grid.rotation_deg,
                "gain": self.grid.gain,
            },
            "timings_ms": {k: round(v, 3) for k, v in self.timings_ms.items()},
        }


class Pipeline:
    """Owns all mutable per-stream state; one tick per incoming frame."""

    def __init__(
        self,
        lut: depthmap.GradientLUT,
        stage_cal: StageCalibration,
        cfg: PipelineConfig,
    ):
        self.lut = lut
        self.stage_cal = stage_cal
        self.cfg = cfg
        self.grid = replace(cfg.grid)
        self.base_center = tuple(cfg.grid.center_px)
        self.marker_state: MarkerState | None = None
        self.display = PinDisplayModel()
        self.theta = TabAngles((0.0, 0.0, 0.0))
        self.prev_targets = actuation.to_targets(np.zeros(actuation.N_PINS))
        self.frame_index = 0
        self.command_log: list[dict] = []

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "Pipeline":
        if cfg.lut_path is None or cfg.stage_cal_path is None:
            raise ValueError("config must name lut_path and stage_cal_path")
        lut = depthmap.GradientLUT.load(cfg.lut_path)
        cal = StageCalibration.load(cfg.stage_cal_path)
        return cls(lut, cal, cfg)

    def tick(self, frame: GelFrame) -> PipelineState:
        idx = self.frame_index
        self.frame_index += 1
        timings: dict[str, float] = {}
        state = PipelineState(frame_index=idx, grid=replace(self.grid))
        saved_markers = self.marker_state

        def timed(name, fn, *args, **kwargs):
            t0 = time.perf_counter()
            out = fn(*args, **kwargs)
            timings[name] = (time.perf_counter() - t0) * 1e3
            return out

        try:
            mask = timed("mask", depthmap.marker_mask, frame)
            if self.marker_state is None:
                self.marker_state = timed(
                    "track",
                    init_markers,
                    frame,
                    self.cfg.marker_rows,
                    self.cfg.marker_cols,
                )
            else:
                tracked = timed("track", track, frame, self.marker_state, self.cfg.thresholds)
                self.marker_state = timed(
                    "correct", correct, tracked, mask, self.cfg.thresholds
                )
            grads = timed("gradients", depthmap.infer_gradients, frame, self.lut, mask)
            depth = timed("integrate", depthmap.integrate, grads, frame.mm_per_px)
            est = timed("shear", shear.estimate, self.marker_state)

            target_pose = StagePose(
                x_mm=est.dx_px * frame.mm_per_px,
                y_mm=est.dy_px * frame.mm_per_px,
                phi_deg=est.dphi_deg,
            )
            t0 = time.perf_counter()
            try:
                ik = stagekin.solve_ik(target_pose, self.stage_cal, seed=self.theta)
            except WorkspaceError as exc:
                ik = exc.result
                state.warnings.append("stage_saturated")
            timings["ik"] = (time.perf_counter() - t0) * 1e3
            self.theta = ik.theta

            if self.cfg.follow_shear:
                self.grid.center_px = (
                    self.base_center[0] + est.dx_px,
                    self.base_center[1] + est.dy_px,
                )
            sampled = timed("sample", actuation.sample, depth, self.grid)
            targets = actuation.to_targets(sampled, self.grid.gain)
            cmd = actuation.encode_all(targets)
            self.prev_targets = targets
            self.display, _ = actuation.step_display(
                self.display, targets, self.cfg.tick_budget_ms / 1e3
            )

            state.depth_small = depth.z[::4, ::4]
            state.depth_peak_mm = depth.peak()
            state.marker_rest = self.marker_state.rest
            state.marker_pos = self.marker_state.pos
            state.marker_trust = self.marker_state.trust
            state.shear_est = est
            state.sampled_mm = sampled
            state.targets = targets
            state.theta = ik.theta
            state.pose = ik.pose
            state.display_mm = self.display.extension_mm
            state.command_bytes = cmd
        except Exception as exc:  # degraded tick: hold previous commands
            self.marker_state = saved_markers
            state.degraded = True
            state.error = f"{type(exc).__name__}: {exc}"
            state.targets = self.prev_targets
            state.display_mm = self.display.extension_mm
            state.command_bytes = b""
        state.timings_ms = timings
        self._log(state)
        return state

    def _log(self, state: PipelineState) -> None:
        rec = {
            "t": state.frame_index,
            "degraded": state.degraded,
            "targets": None
            if state.targets is None
            else np.round(state.targets.extension_mm, 6).tolist(),
            "theta": None if state.theta is None else list(state.theta.theta),
            "bytes": state.command_bytes.hex(),
        }
        self.command_log.append(rec)

    def write_command_log(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for rec in self.command_log:
                fh.write(json.dumps(rec) + "\n")

    def write_trust_log(self, path: str | Path, states: list[PipelineState]) -> None:
        with open(path, "w") as fh:
            for st in states:
                trust = (
                    None if st.marker_trust is None else st.marker_trust.astype(int).tolist()
                )
                fh.write(json.dumps({"t": st.frame_index, "trust": trust}) + "\n")


def replay(
    frames: list[tuple[GelFrame, dict]],
    pipeline: Pipeline,
) -> tuple[list[PipelineState], dict]:
    """Run the tick loop over a frame sequence; returns states and a report."""
    states = []
    wall = []
    for frame, _rec in frames:
        t0 = time.perf_counter()
        states.append(pipeline.tick(frame))
        wall.append((time.perf_counter() - t0) * 1e3)
    wall_arr = np.asarray(wall) if wall else np.zeros(0)
    stage_keys = sorted({k for st in states for k in st.timings_ms})
    report = {
        "ticks": len(states),
        "degraded": sum(st.degraded for st in states),
        "mean_tick_ms": float(wall_arr.mean()) if len(wall_arr) else 0.0,
        "p50_tick_ms": float(np.percentile(wall_arr, 50)) if len(wall_arr) else 0.0,
        "p95_tick_ms": float(np.percentile(wall_arr, 95)) if len(wall_arr) else 0.0,
        "stages_ms": {
            k: {
                "mean": float(
                    np.mean([st.timings_ms[k] for st in states if k in st.timings_ms])
                ),
                "p95": float(
                    np.percentile(
                        [st.timings_ms[k] for st in states if k in st.timings_ms], 95
                    )
                ),
            }
            for k in stage_keys
        },
    }
    return states, report
