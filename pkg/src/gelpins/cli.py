"""Command-line entry points."""
from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from . import depthmap, report, scenarios, stagekin, synthgel
from .pipeline import Pipeline, PipelineConfig, replay as run_replay


@click.group()
def main():
    """Tactile-to-pin-display processing toolkit."""


@main.command()
@click.argument("scenario", type=click.Choice(scenarios.SCENARIOS))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--frames", default=20, show_default=True)
def simulate(scenario, out_dir, frames):
    """Generate a synthetic frame sequence for SCENARIO."""
    seq = scenarios.generate(scenario, frames=frames)
    synthgel.save_sequence(out_dir, seq)
    click.echo(f"wrote {len(seq)} frames to {out_dir}")


@main.command()
@click.argument("seq_dir", type=click.Path(exists=True))
@click.option("-o", "--out", "out_path", required=True, type=click.Path())
@click.option("--bins", default=32, show_default=True)
def calibrate(seq_dir, out_path, bins):
    """Build the color-to-gradient LUT from a calibration sequence."""
    frames = [f for f, _ in synthgel.load_sequence(seq_dir)]
    lut = depthmap.calibrate(frames, bins=bins)
    lut.save(out_path)
    click.echo(
        f"LUT: {lut.bins}^3 bins, {lut.populated_bins()} populated, saved to {out_path}"
    )


@main.command("fit-stage")
@click.option("-o", "--out", "out_path", required=True, type=click.Path())
@click.option("--samples", "samples_path", type=click.Path(exists=True),
              help="JSON list of {theta: [3], pose: [x_mm, y_mm, phi_deg]} records")
@click.option("--degree", default=3, show_default=True)
def fit_stage(out_path, samples_path, degree):
    """Fit the stage calibration, or write the synthetic reference one."""
    if samples_path is None:
        cal = stagekin.reference_calibration()
    else:
        records = json.loads(Path(samples_path).read_text())
        samples = [
            (stagekin.TabAngles(tuple(r["theta"])), stagekin.StagePose(*r["pose"]))
            for r in records
        ]
        cal = stagekin.fit(samples, degree=degree)
    cal.save(out_path)
    click.echo(f"stage calibration ({cal.provenance}) saved to {out_path}")


def _load_config(config_path, gain, spacing):
    cfg = PipelineConfig.from_json(config_path)
    if gain is not None:
        cfg.grid.gain = gain
    if spacing is not None:
        cfg.grid.spacing_px = spacing
    return cfg


@main.command("replay")
@click.argument("seq_dir", type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", "out_dir", required=True, type=click.Path())
@click.option("--gain", type=float, default=None)
@click.option("--spacing", type=float, default=None)
@click.option("--debug-trust", is_flag=True, help="dump per-frame trust bitmaps")
def replay_cmd(seq_dir, config_path, out_dir, gain, spacing, debug_trust):
    """Replay a recorded sequence; write command log, metrics CSV and figures."""
    cfg = _load_config(config_path, gain, spacing)
    frames = synthgel.load_sequence(seq_dir)
    pipeline = Pipeline.from_config(cfg)
    states, rep = run_replay(frames, pipeline)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_command_log(out / "commands.jsonl")
    report.write_metrics_csv(out / "metrics.csv", states)
    report.render_figures(out, states)
    if debug_trust:
        pipeline.write_trust_log(out / "trust.jsonl", states)
    (out / "report.json").write_text(json.dumps(rep, indent=2) + "\n")
    click.echo(
        f"{rep['ticks']} ticks ({rep['degraded']} degraded), "
        f"mean {rep['mean_tick_ms']:.1f} ms, p95 {rep['p95_tick_ms']:.1f} ms"
    )
    for k, v in rep["stages_ms"].items():
        click.echo(f"  {k:>10s}: mean {v['mean']:6.2f} ms  p95 {v['p95']:6.2f} ms")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=None)
def serve(config_path, port):
    """Run the live state stream endpoint."""
    from . import server

    cfg = PipelineConfig.from_json(config_path)
    if port is not None:
        cfg.stream_port = port
    click.echo(f"serving ws://127.0.0.1:{cfg.stream_port}/stream")
    server.serve(cfg)


if __name__ == "__main__":
    main()
