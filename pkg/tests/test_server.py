import numpy as np
import pytest
from fastapi.testclient import TestClient

from gelpins import scenarios
from gelpins.actuation import SamplingGrid
from gelpins.pipeline import Pipeline, PipelineConfig
from gelpins.server import KNOB_BOUNDS, PipelineRunner, make_app


def make_runner(lut, stage_cal, scenario="sphere_press", n_frames=4, **cfg_kwargs):
    pipeline = Pipeline(lut, stage_cal, PipelineConfig(source=scenario, **cfg_kwargs))
    frames = scenarios.generate(scenario, frames=n_frames)
    return PipelineRunner(pipeline, scenario=scenario, frames=frames, realtime=False)


def recv_until(ws, kind):
    for _ in range(50):
        msg = ws.receive_json()
        if msg["type"] == kind:
            return msg
    raise AssertionError(f"no {kind!r} message received")


class TestControls:
    def test_valid_knobs_accepted(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        for msg in (
            {"type": "set", "knob": "gain", "value": 2.0},
            {"type": "set", "knob": "spacing", "value": 15.0},
            {"type": "set", "knob": "rotation", "value": 45.0},
            {"type": "set", "knob": "center", "value": [100.0, 100.0]},
            {"type": "pause"},
            {"type": "resume"},
            {"type": "step"},
            {"type": "scenario", "name": "concentric"},
        ):
            ok, err = runner.submit(msg)
            assert ok, err

    def test_out_of_bounds_rejected_without_effect(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        before = runner.pipeline.grid.gain
        for knob, value in (
            ("gain", KNOB_BOUNDS["gain"][1] + 1),
            ("gain", "two"),
            ("spacing", 0.0),
            ("center", [9999.0, 0.0]),
            ("center", [1.0]),
        ):
            ok, err = runner.submit({"type": "set", "knob": knob, "value": value})
            assert not ok
            assert err
        runner._drain_controls()
        assert runner.pipeline.grid.gain == before

    def test_unknown_messages_rejected(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        assert not runner.submit({"type": "set", "knob": "bogus", "value": 1})[0]
        assert not runner.submit({"type": "warp"})[0]
        assert not runner.submit("gain=2")[0]
        assert not runner.submit({"type": "scenario", "name": "bogus"})[0]

    def test_applied_at_tick_boundary(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        runner.submit({"type": "set", "knob": "gain", "value": 2.0})
        assert runner.pipeline.grid.gain == 1.0  # queued, not yet applied
        snap = runner.tick_once()
        assert runner.pipeline.grid.gain == 2.0
        assert snap["grid"]["gain"] == 2.0

    def test_last_writer_wins(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        runner.submit({"type": "set", "knob": "gain", "value": 2.0})
        runner.submit({"type": "set", "knob": "gain", "value": 0.5})
        runner.tick_once()
        assert runner.pipeline.grid.gain == 0.5

    def test_gain_scales_targets(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        runner.tick_once()  # init markers on the rest frame
        base = runner.tick_once()
        runner.submit({"type": "set", "knob": "gain", "value": 2.0})
        doubled = runner.tick_once()
        a = np.asarray(base["targets"]["extension_mm"])
        b = np.asarray(doubled["targets"]["extension_mm"])
        assert np.allclose(b, np.clip(2.0 * a, 0.0, 3.0), atol=1e-2)

    def test_pause_and_step(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        runner.submit({"type": "pause"})
        assert runner.tick_once() is None
        assert runner.tick_once() is None
        runner.submit({"type": "step"})
        assert runner.tick_once() is not None
        assert runner.tick_once() is None
        runner.submit({"type": "resume"})
        assert runner.tick_once() is not None

    def test_scenario_switch_resets_markers(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        runner.tick_once()
        assert runner.pipeline.marker_state is not None
        runner.submit({"type": "scenario", "name": "sphere_shear"})
        runner.tick_once()
        assert runner.scenario == "sphere_shear"
        assert runner._cursor == 1


class TestSpacingResolution:
    def test_concentric_gap_resolves_at_fine_spacing(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal, scenario="concentric", n_frames=5)
        runner.tick_once()  # rest frame
        results = {}
        for spacing in (45.0, 30.0, 15.0):
            runner.submit({"type": "set", "knob": "spacing", "value": spacing})
            snap = runner.tick_once()
            assert snap["grid"]["spacing_px"] == spacing
            grid = SamplingGrid(
                center_px=tuple(snap["grid"]["center_px"]),
                spacing_px=snap["grid"]["spacing_px"],
                rotation_deg=snap["grid"]["rotation_deg"],
            )
            depths = np.asarray(snap["sampled_mm"])
            results[spacing] = scenarios.ring_gap_metric(
                depths, grid.points(), (160.0, 120.0)
            )
        assert results[45.0][0] == 0  # coarse grid misses the gap entirely
        assert results[15.0][0] > 0  # fine grid lands samples in the gap...
        ridge = max(np.asarray(s["sampled_mm"]).max() for s in [snap])
        assert results[15.0][1] < 0.5 * ridge  # ...and reads them as shallow


class TestHttp:
    def test_health(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        app = make_app(runner, autostart=False)
        with TestClient(app) as client:
            runner.tick_once()
            doc = client.get("/health").json()
            assert doc["ok"] is True
            assert doc["scenario"] == "sphere_press"
            assert doc["snapshots"] == 1

    def test_stream_snapshot_and_controls(self, lut, stage_cal):
        runner = make_runner(lut, stage_cal)
        app = make_app(runner, autostart=False)
        with TestClient(app) as client, client.websocket_connect("/stream") as ws:
            runner.tick_once()
            snap = recv_until(ws, "snapshot")
            assert snap["data"]["schema_version"] == 1
            assert snap["data"]["frame_index"] == 0

            ws.send_json({"type": "set", "knob": "gain", "value": 2.0})
            ack = recv_until(ws, "ack")
            assert ack["control"]["value"] == 2.0

            ws.send_json({"type": "set", "knob": "gain", "value": 99.0})
            err = recv_until(ws, "error")
            assert "gain" in err["message"]

            runner.tick_once()
            snap = recv_until(ws, "snapshot")
            assert snap["data"]["grid"]["gain"] == 2.0
