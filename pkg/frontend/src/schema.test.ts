import { describe, expect, it } from "vitest";

import {
  N_PINS,
  controlSchema,
  parseServerMessage,
  parseSnapshot,
} from "./schema.js";

export function makeSnapshot(overrides: Record<string, unknown> = {}) {
  return {
    schema_version: 1,
    frame_index: 3,
    degraded: false,
    error: null,
    warnings: [],
    depth: { peak_mm: 1.0, small: [[0, 0.5], [1.0, 0.25]] },
    markers: {
      rest: [[20, 20], [50, 20], [20, 50]],
      pos: [[22, 20], [52, 20], [22, 50]],
      trust: [true, true, false],
    },
    shear: { dx_px: 2, dy_px: 0, dphi_deg: 0, residual_px: 0.1, n_markers: 3 },
    sampled_mm: Array(N_PINS).fill(0.5),
    targets: {
      extension_mm: Array(N_PINS).fill(0.5),
      pulse_qus: Array(N_PINS).fill(4667),
    },
    display_mm: Array(N_PINS).fill(0.25),
    stage: { theta: [0.1, 0, 0], pose: [0.15, 0, 0] },
    grid: { center_px: [160, 120], spacing_px: 30, rotation_deg: 0, gain: 1 },
    timings_ms: { track: 2.5, integrate: 6.0 },
    ...overrides,
  };
}

describe("parseSnapshot", () => {
  it("accepts a well-formed snapshot", () => {
    const parsed = parseSnapshot(makeSnapshot());
    expect(parsed.ok).toBe(true);
    if (parsed.ok) {
      expect(parsed.snapshot.frame_index).toBe(3);
      expect(parsed.snapshot.grid?.gain).toBe(1);
    }
  });

  it("accepts degraded snapshots with null payloads", () => {
    const parsed = parseSnapshot(
      makeSnapshot({
        degraded: true,
        error: "ValueError: gradients must be finite",
        depth: { peak_mm: 0, small: null },
        markers: { rest: null, pos: null, trust: null },
        shear: null,
        sampled_mm: null,
        stage: null,
        grid: null,
      }),
    );
    expect(parsed.ok).toBe(true);
  });

  it("flags version skew as schema-mismatch", () => {
    const parsed = parseSnapshot(makeSnapshot({ schema_version: 2 }));
    expect(parsed.ok).toBe(false);
    if (!parsed.ok) {
      expect(parsed.reason).toBe("schema-mismatch");
      expect(parsed.detail).toContain("v2");
    }
  });

  it("rejects structural garbage as invalid, not mismatch", () => {
    for (const bad of [
      makeSnapshot({ sampled_mm: [1, 2, 3] }), // wrong pin count
      makeSnapshot({ frame_index: -1 }),
      makeSnapshot({ markers: { rest: [[1]], pos: null, trust: null } }),
      { schema_version: 1 },
      null,
    ]) {
      const parsed = parseSnapshot(bad);
      expect(parsed.ok).toBe(false);
      if (!parsed.ok) expect(parsed.reason).toBe("invalid");
    }
  });
});

describe("controlSchema", () => {
  it("accepts every knob and command", () => {
    for (const msg of [
      { type: "set", knob: "gain", value: 2 },
      { type: "set", knob: "center", value: [100, 100] },
      { type: "pause" },
      { type: "step" },
      { type: "scenario", name: "concentric" },
    ]) {
      expect(controlSchema.safeParse(msg).success).toBe(true);
    }
  });

  it("rejects unknown knobs and types", () => {
    expect(
      controlSchema.safeParse({ type: "set", knob: "warp", value: 1 }).success,
    ).toBe(false);
    expect(controlSchema.safeParse({ type: "restart" }).success).toBe(false);
  });
});

describe("parseServerMessage", () => {
  it("distinguishes snapshot, ack and error", () => {
    expect(parseServerMessage({ type: "snapshot", data: {} })?.type).toBe(
      "snapshot",
    );
    expect(
      parseServerMessage({ type: "ack", control: { type: "pause" } })?.type,
    ).toBe("ack");
    expect(
      parseServerMessage({
        type: "error",
        control: {},
        message: "gain must lie in [0.1, 5.0]",
      })?.type,
    ).toBe("error");
    expect(parseServerMessage({ type: "noise" })).toBeNull();
  });
});
