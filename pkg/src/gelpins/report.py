"""Replay reporting: per-tick CSV plus rendered matplotlib figures."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .actuation import COLS, ROWS
from .pipeline import PipelineState


def write_metrics_csv(path: str | Path, states: list[PipelineState]) -> None:
    stage_keys = sorted({k for st in states for k in st.timings_ms})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["frame", "degraded", "depth_peak_mm", "dx_px", "dy_px", "dphi_deg",
             "n_trusted", "max_extension_mm"]
            + [f"{k}_ms" for k in stage_keys]
        )
        for st in states:
            est = st.shear_est
            writer.writerow(
                [
                    st.frame_index,
                    int(st.degraded),
                    f"{st.depth_peak_mm:.4f}",
                    "" if est is None else f"{est.dx_px:.3f}",
                    "" if est is None else f"{est.dy_px:.3f}",
                    "" if est is None else f"{est.dphi_deg:.3f}",
                    "" if st.marker_trust is None else int(st.marker_trust.sum()),
                    ""
                    if st.targets is None
                    else f"{st.targets.extension_mm.max():.4f}",
                ]
                + [f"{st.timings_ms.get(k, float('nan')):.3f}" for k in stage_keys]
            )


def render_figures(out_dir: str | Path, states: list[PipelineState]) -> list[Path]:
    """Depth heatmap, pin-target panel and timing summary for a replay."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    made = []
    # pick the tick with the deepest contact as the representative frame
    ok = [st for st in states if not st.degraded and st.depth_small is not None]
    if ok:
        rep = max(ok, key=lambda st: st.depth_peak_mm)

        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(rep.depth_small, cmap="viridis")
        fig.colorbar(im, ax=ax, label="depth (mm)")
        ax.set_title(f"depth map, frame {rep.frame_index}")
        p = out / "depth_heatmap.png"
        fig.savefig(p, dpi=120, bbox_inches="tight")
        plt.close(fig)
        made.append(p)

        fig, ax = plt.subplots(figsize=(4, 3))
        panel = rep.targets.extension_mm.reshape(ROWS, COLS)
        ax.imshow(panel, cmap="gray", vmin=0.0, vmax=3.0)
        for (r, c), v in np.ndenumerate(panel):
            ax.text(c, r, f"{v:.1f}", ha="center", va="center",
                    color="tab:orange", fontsize=8)
        ax.set_title(f"pin targets (mm), frame {rep.frame_index}")
        ax.set_xticks([])
        ax.set_yticks([])
        p = out / "pin_targets.png"
        fig.savefig(p, dpi=120, bbox_inches="tight")
        plt.close(fig)
        made.append(p)

    stage_keys = sorted({k for st in states for k in st.timings_ms})
    if stage_keys:
        means = [
            np.mean([st.timings_ms[k] for st in states if k in st.timings_ms])
            for k in stage_keys
        ]
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.bar(stage_keys, means)
        ax.set_ylabel("mean ms / tick")
        ax.set_title("per-stage timings")
        plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
        p = out / "timings.png"
        fig.savefig(p, dpi=120, bbox_inches="tight")
        plt.close(fig)
        made.append(p)
    return made
