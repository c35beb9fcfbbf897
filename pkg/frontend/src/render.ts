/**
 * Pure rendering helpers: snapshot values in, pixel buffers and draw
 * primitives out. No canvas access here so everything is unit-testable;
 * app.ts blits the results.
 */
import {
  Grid,
  MAX_EXTENSION_MM,
  PIN_COLS,
  PIN_ROWS,
  Snapshot,
} from "./schema.js";

export type Colormap = "viridis" | "gray";

// five-stop approximation of viridis, linearly interpolated
const VIRIDIS_STOPS: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

function colorAt(t: number, map: Colormap): [number, number, number] {
  const v = Math.min(1, Math.max(0, t));
  if (map === "gray") {
    const g = Math.round(v * 255);
    return [g, g, g];
  }
  const x = v * (VIRIDIS_STOPS.length - 1);
  const i = Math.min(VIRIDIS_STOPS.length - 2, Math.floor(x));
  const f = x - i;
  const a = VIRIDIS_STOPS[i]!;
  const b = VIRIDIS_STOPS[i + 1]!;
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** RGBA heatmap of the downsampled depth image; rows is [y][x] in mm. */
export function depthHeatmap(
  rows: number[][],
  map: Colormap = "viridis",
): { pixels: Uint8ClampedArray<ArrayBuffer>; width: number; height: number } {
  const height = rows.length;
  const width = height > 0 ? rows[0]!.length : 0;
  let peak = 0;
  for (const row of rows) for (const v of row) peak = Math.max(peak, v);
  const scale = peak > 0 ? 1 / peak : 0;
  const pixels = new Uint8ClampedArray(width * height * 4);
  for (let y = 0; y < height; y++) {
    const row = rows[y]!;
    for (let x = 0; x < width; x++) {
      const [r, g, b] = colorAt(row[x]! * scale, map);
      const o = (y * width + x) * 4;
      pixels[o] = r;
      pixels[o + 1] = g;
      pixels[o + 2] = b;
      pixels[o + 3] = 255;
    }
  }
  return { pixels, width, height };
}

/**
 * Grayscale shades for the 6×4 pin panel, row-major. Longer pins render
 * whiter: 0 mm -> 0 (black), full extension -> 255 (white).
 */
export function pinPanelShades(extensionMm: number[]): number[] {
  return extensionMm.map((e) =>
    Math.round(255 * Math.min(1, Math.max(0, e / MAX_EXTENSION_MM))),
  );
}

export interface Arrow {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  trusted: boolean;
}

/** Marker displacement arrows (rest -> current position) for the raw panel. */
export function markerArrows(
  rest: Array<[number, number]>,
  pos: Array<[number, number]>,
  trust: boolean[],
): Arrow[] {
  const n = Math.min(rest.length, pos.length, trust.length);
  const arrows: Arrow[] = [];
  for (let i = 0; i < n; i++) {
    const [x1, y1] = rest[i]!;
    const [x2, y2] = pos[i]!;
    arrows.push({ x1, y1, x2, y2, trusted: trust[i]! });
  }
  return arrows;
}

export type Point = [number, number];

/**
 * Corners of the sampling-grid overlay rectangle (the draggable outline on
 * the raw frame), one half-spacing beyond the outermost lattice points,
 * rotated with the grid. Order: top-left, top-right, bottom-right,
 * bottom-left in grid-local coordinates.
 */
export function gridRectCorners(grid: Grid): [Point, Point, Point, Point] {
  const hx = (PIN_COLS / 2) * grid.spacing_px;
  const hy = (PIN_ROWS / 2) * grid.spacing_px;
  const a = (grid.rotation_deg * Math.PI) / 180;
  const c = Math.cos(a);
  const s = Math.sin(a);
  const [cx, cy] = grid.center_px;
  const corner = (x: number, y: number): Point => [
    cx + x * c - y * s,
    cy + x * s + y * c,
  ];
  return [corner(-hx, -hy), corner(hx, -hy), corner(hx, hy), corner(-hx, hy)];
}

/** Lattice sample points in frame coordinates, row-major like sampled_mm. */
export function gridPoints(grid: Grid): Point[] {
  const a = (grid.rotation_deg * Math.PI) / 180;
  const c = Math.cos(a);
  const s = Math.sin(a);
  const [cx, cy] = grid.center_px;
  const points: Point[] = [];
  for (let r = 0; r < PIN_ROWS; r++) {
    const y = (r - (PIN_ROWS - 1) / 2) * grid.spacing_px;
    for (let col = 0; col < PIN_COLS; col++) {
      const x = (col - (PIN_COLS - 1) / 2) * grid.spacing_px;
      points.push([cx + x * c - y * s, cy + x * s + y * c]);
    }
  }
  return points;
}

/** One-line status summary shown above the panels. */
export function statusLine(snapshot: Snapshot): string {
  const parts = [`frame ${snapshot.frame_index}`];
  if (snapshot.degraded) parts.push(`DEGRADED (${snapshot.error ?? "unknown"})`);
  if (snapshot.shear) {
    parts.push(
      `shear (${snapshot.shear.dx_px.toFixed(1)}, ` +
        `${snapshot.shear.dy_px.toFixed(1)}) px, ` +
        `${snapshot.shear.dphi_deg.toFixed(1)}°`,
    );
  }
  if (snapshot.stage?.pose) {
    const [x, y, phi] = snapshot.stage.pose;
    parts.push(
      `stage (${x!.toFixed(2)}, ${y!.toFixed(2)}) mm, ${phi!.toFixed(1)}°`,
    );
  }
  for (const w of snapshot.warnings) parts.push(w);
  return parts.join(" · ");
}
