/**
 * Browser entry point: one WebSocket, one ControlTracker, and a render loop
 * that always draws the latest validated snapshot (intermediate snapshots are
 * dropped — views are a pure function of the newest state).
 */
import { ControlTracker, clampCenter } from "./controls.js";
import {
  Snapshot,
  parseServerMessage,
  parseSnapshot,
} from "./schema.js";
import {
  Colormap,
  depthHeatmap,
  gridPoints,
  gridRectCorners,
  markerArrows,
  pinPanelShades,
  statusLine,
} from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function ctx2d(id: string): CanvasRenderingContext2D {
  const canvas = el<HTMLCanvasElement>(id);
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error(`no 2d context on #${id}`);
  return ctx;
}

export function start(url: string): void {
  const banner = el<HTMLDivElement>("banner");
  const status = el<HTMLDivElement>("status");
  const rawCtx = ctx2d("raw-panel");
  const depthCtx = ctx2d("depth-panel");
  const sampledCtx = ctx2d("sampled-panel");
  const displayCtx = ctx2d("display-panel");
  const stageCtx = ctx2d("stage-panel");

  let latest: Snapshot | null = null;
  let halted = false;
  let colormap: Colormap = "viridis";

  const ws = new WebSocket(url);
  const tracker = new ControlTracker((control) =>
    ws.send(JSON.stringify(control)),
  );

  ws.onmessage = (event) => {
    const msg = parseServerMessage(JSON.parse(event.data));
    if (!msg) return;
    if (msg.type === "ack" || msg.type === "error") {
      tracker.onReply(msg.control);
      if (msg.type === "error") {
        status.textContent = `control rejected: ${msg.message ?? "unknown"}`;
        syncKnobs(); // knob reverts to the last streamed value
      }
      return;
    }
    const parsed = parseSnapshot(msg.data);
    if (!parsed.ok) {
      if (parsed.reason === "schema-mismatch") {
        banner.textContent = parsed.detail;
        banner.hidden = false;
        halted = true; // rendering paused until the stream matches
      }
      return;
    }
    latest = parsed.snapshot;
  };
  ws.onclose = () => {
    banner.textContent = "stream disconnected";
    banner.hidden = false;
  };

  // -- knobs ---------------------------------------------------------------
  const gain = el<HTMLInputElement>("gain");
  const spacing = el<HTMLInputElement>("spacing");
  const rotation = el<HTMLInputElement>("rotation");
  gain.oninput = () => tracker.set("gain", Number(gain.value));
  spacing.oninput = () => tracker.set("spacing", Number(spacing.value));
  rotation.oninput = () => tracker.set("rotation", Number(rotation.value));
  el<HTMLButtonElement>("pause").onclick = () =>
    ws.send(JSON.stringify({ type: "pause" }));
  el<HTMLButtonElement>("resume").onclick = () =>
    ws.send(JSON.stringify({ type: "resume" }));
  el<HTMLButtonElement>("step").onclick = () =>
    ws.send(JSON.stringify({ type: "step" }));
  el<HTMLSelectElement>("colormap").onchange = (e) => {
    colormap = (e.target as HTMLSelectElement).value as Colormap;
  };

  function syncKnobs(): void {
    if (!latest?.grid) return;
    if (!tracker.isPending("gain")) gain.value = String(latest.grid.gain);
    if (!tracker.isPending("spacing"))
      spacing.value = String(latest.grid.spacing_px);
    if (!tracker.isPending("rotation"))
      rotation.value = String(latest.grid.rotation_deg);
  }

  // -- grid drag on the raw panel ------------------------------------------
  let dragging = false;
  const raw = rawCtx.canvas;
  const frameXY = (e: MouseEvent): [number, number] => {
    const r = raw.getBoundingClientRect();
    return [
      ((e.clientX - r.left) / r.width) * raw.width,
      ((e.clientY - r.top) / r.height) * raw.height,
    ];
  };
  raw.onmousedown = () => {
    dragging = true;
  };
  raw.onmouseup = () => {
    dragging = false;
  };
  raw.onmousemove = (e) => {
    if (!dragging) return;
    tracker.set("center", clampCenter(frameXY(e))); // tracker throttles sends
  };

  // -- panel painters ------------------------------------------------------
  function paintGrayPanel(
    ctx: CanvasRenderingContext2D,
    values: number[],
  ): void {
    const cw = ctx.canvas.width / 6;
    const ch = ctx.canvas.height / 4;
    for (let r = 0; r < 4; r++) {
      for (let c = 0; c < 6; c++) {
        const shade = values[r * 6 + c]!;
        ctx.fillStyle = `rgb(${shade},${shade},${shade})`;
        ctx.fillRect(c * cw, r * ch, cw, ch);
      }
    }
  }

  function paint(snapshot: Snapshot): void {
    // (i) raw view: marker arrows plus the draggable grid rectangle
    rawCtx.fillStyle = "#222";
    rawCtx.fillRect(0, 0, raw.width, raw.height);
    if (snapshot.markers.rest && snapshot.markers.pos && snapshot.markers.trust) {
      for (const a of markerArrows(
        snapshot.markers.rest,
        snapshot.markers.pos,
        snapshot.markers.trust,
      )) {
        rawCtx.strokeStyle = a.trusted ? "#6f6" : "#f66";
        rawCtx.beginPath();
        rawCtx.moveTo(a.x1, a.y1);
        rawCtx.lineTo(a.x2, a.y2);
        rawCtx.stroke();
        rawCtx.fillStyle = rawCtx.strokeStyle;
        rawCtx.fillRect(a.x2 - 1.5, a.y2 - 1.5, 3, 3);
      }
    }
    if (snapshot.grid) {
      const [p0, p1, p2, p3] = gridRectCorners(snapshot.grid);
      rawCtx.strokeStyle = "#fff";
      rawCtx.beginPath();
      rawCtx.moveTo(p0[0], p0[1]);
      for (const [x, y] of [p1, p2, p3, p0]) rawCtx.lineTo(x, y);
      rawCtx.stroke();
      rawCtx.fillStyle = "#fff";
      for (const [x, y] of gridPoints(snapshot.grid))
        rawCtx.fillRect(x - 1, y - 1, 2, 2);
    }

    // (ii) depth heatmap
    if (snapshot.depth.small) {
      const { pixels, width, height } = depthHeatmap(
        snapshot.depth.small,
        colormap,
      );
      if (width > 0) {
        depthCtx.putImageData(new ImageData(pixels, width, height), 0, 0);
      }
    }

    // (iii) sampled 6x4 grid and (iv) virtual pin display, both grayscale
    if (snapshot.targets)
      paintGrayPanel(sampledCtx, pinPanelShades(snapshot.targets.extension_mm));
    if (snapshot.display_mm)
      paintGrayPanel(displayCtx, pinPanelShades(snapshot.display_mm));

    // (v) stage pose: crosshair translated/rotated to the commanded pose
    const sc = stageCtx.canvas;
    stageCtx.fillStyle = "#222";
    stageCtx.fillRect(0, 0, sc.width, sc.height);
    if (snapshot.stage?.pose) {
      const [xMm, yMm, phiDeg] = snapshot.stage.pose;
      const scale = sc.width / 4; // ±2 mm field of view
      stageCtx.save();
      stageCtx.translate(sc.width / 2 + xMm! * scale, sc.height / 2 + yMm! * scale);
      stageCtx.rotate((phiDeg! * Math.PI) / 180);
      stageCtx.strokeStyle = "#6cf";
      stageCtx.strokeRect(-20, -20, 40, 40);
      stageCtx.beginPath();
      stageCtx.moveTo(0, -26);
      stageCtx.lineTo(0, 26);
      stageCtx.moveTo(-26, 0);
      stageCtx.lineTo(26, 0);
      stageCtx.stroke();
      stageCtx.restore();
    }

    status.textContent = statusLine(snapshot);
    syncKnobs();
  }

  function loop(): void {
    if (!halted && latest) paint(latest);
    requestAnimationFrame(loop);
  }
  requestAnimationFrame(loop);
}
