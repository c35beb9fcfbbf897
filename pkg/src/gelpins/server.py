"""Live state stream for the operator console.

A background thread owns the tick loop; websocket clients receive JSON
snapshots and submit control messages that are validated up front and applied
atomically at the next tick boundary.
"""
from __future__ import annotations

import asyncio
import queue
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import replace

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import scenarios
from .core import FRAME_HEIGHT, FRAME_WIDTH
from .pipeline import Pipeline

KNOB_BOUNDS = {
    "gain": (0.1, 5.0),
    "spacing": (5.0, 60.0),
}


class PipelineRunner:
    """Sequential tick loop plus a control queue drained at tick boundaries."""

    def __init__(self, pipeline: Pipeline, scenario: str | None = None,
                 frames=None, realtime: bool = True):
        self.pipeline = pipeline
        self.scenario = scenario or pipeline.cfg.source
        self.frames = frames if frames is not None else scenarios.generate(self.scenario)
        self.realtime = realtime
        self.controls: queue.Queue[dict] = queue.Queue()
        self.latest: tuple[int, dict | None] = (0, None)
        self.paused = False
        self._step_once = False
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._cursor = 0

    # -- control validation (synchronous, before enqueue) -------------------
    def submit(self, msg: dict) -> tuple[bool, str | None]:
        if not isinstance(msg, dict) or "type" not in msg:
            return False, "control message must be an object with a 'type' field"
        kind = msg["type"]
        if kind == "set":
            knob = msg.get("knob")
            value = msg.get("value")
            if knob in KNOB_BOUNDS:
                lo, hi = KNOB_BOUNDS[knob]
                if not isinstance(value, (int, float)) or not lo <= value <= hi:
                    return False, f"{knob} must lie in [{lo}, {hi}]"
            elif knob == "rotation":
                if not isinstance(value, (int, float)):
                    return False, "rotation must be a number"
            elif knob == "center":
                if (
                    not isinstance(value, (list, tuple))
                    or len(value) != 2
                    or not all(isinstance(v, (int, float)) for v in value)
                    or not (0 <= value[0] <= FRAME_WIDTH - 1)
                    or not (0 <= value[1] <= FRAME_HEIGHT - 1)
                ):
                    return False, "center must be [x, y] inside frame bounds"
            else:
                return False, f"unknown knob {knob!r}"
        elif kind in ("pause", "resume", "step"):
            pass
        elif kind == "scenario":
            if msg.get("name") not in scenarios.SCENARIOS:
                return False, f"unknown scenario {msg.get('name')!r}"
        else:
            return False, f"unknown control type {kind!r}"
        self.controls.put(msg)
        return True, None

    # -- applied only between ticks -----------------------------------------
    def _drain_controls(self) -> None:
        while True:
            try:
                msg = self.controls.get_nowait()
            except queue.Empty:
                return
            kind = msg["type"]
            if kind == "set":
                knob, value = msg["knob"], msg["value"]
                grid = self.pipeline.grid
                if knob == "gain":
                    grid.gain = float(value)
                elif knob == "spacing":
                    grid.spacing_px = float(value)
                elif knob == "rotation":
                    grid.rotation_deg = float(value)
                elif knob == "center":
                    grid.center_px = (float(value[0]), float(value[1]))
                    self.pipeline.base_center = grid.center_px
            elif kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "step":
                self._step_once = True
            elif kind == "scenario":
                self.scenario = msg["name"]
                self.frames = scenarios.generate(self.scenario)
                self._cursor = 0
                self.pipeline.marker_state = None

    def tick_once(self) -> dict | None:
        self._drain_controls()
        if self.paused and not self._step_once:
            return None
        self._step_once = False
        frame, _rec = self.frames[self._cursor % len(self.frames)]
        self._cursor += 1
        state = self.pipeline.tick(frame)
        snap = state.snapshot()
        snap_id = self.latest[0] + 1
        self.latest = (snap_id, snap)
        return snap

    def _run(self) -> None:
        budget = self.pipeline.cfg.tick_budget_ms / 1e3
        while not self._stop.is_set():
            t0 = time.perf_counter()
            snap = self.tick_once()
            if snap is None:
                time.sleep(0.02)
                continue
            if self.realtime:
                leftover = budget - (time.perf_counter() - t0)
                if leftover > 0:
                    time.sleep(leftover)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)


def make_app(runner: PipelineRunner, autostart: bool = True) -> FastAPI:
    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if autostart and runner._thread is None:
            runner.start()
        yield
        runner.stop()

    app = FastAPI(title="gelpins stream", lifespan=lifespan)

    @app.get("/health")
    def health():
        snap_id, _ = runner.latest
        return {"ok": True, "snapshots": snap_id, "scenario": runner.scenario}

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        send_lock = asyncio.Lock()

        async def sender():
            last = -1
            while True:
                snap_id, snap = runner.latest
                if snap is not None and snap_id != last:
                    last = snap_id
                    async with send_lock:
                        await ws.send_json({"type": "snapshot", "data": snap})
                await asyncio.sleep(0.01)

        async def receiver():
            while True:
                msg = await ws.receive_json()
                ok, err = runner.submit(msg)
                reply = {"type": "ack" if ok else "error", "control": msg}
                if err:
                    reply["message"] = err
                async with send_lock:
                    await ws.send_json(reply)

        tasks = [asyncio.create_task(sender()), asyncio.create_task(receiver())]
        try:
            await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
        except WebSocketDisconnect:
            pass
        finally:
            for t in tasks:
                t.cancel()

    return app


def serve(cfg, host: str = "127.0.0.1") -> None:
    """Run the stream endpoint until interrupted."""
    import uvicorn

    pipeline = Pipeline.from_config(cfg)
    runner = PipelineRunner(pipeline)
    app = make_app(runner)
    uvicorn.run(app, host=host, port=cfg.stream_port, log_level="warning")
