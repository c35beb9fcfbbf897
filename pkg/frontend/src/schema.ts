/**
 * Runtime validation for the pipeline stream protocol.
 *
 * The server pushes versioned JSON snapshots and replies to every control
 * message with an ack or error. Everything crossing the socket is validated
 * here; the rest of the console only ever sees typed values.
 */
import { z } from "zod";

export const SCHEMA_VERSION = 1;

export const FRAME_WIDTH = 320;
export const FRAME_HEIGHT = 240;
export const PIN_ROWS = 4;
export const PIN_COLS = 6;
export const N_PINS = PIN_ROWS * PIN_COLS;
export const MAX_EXTENSION_MM = 3.0;

const xy = z.tuple([z.number(), z.number()]);

export const gridSchema = z.object({
  center_px: xy,
  spacing_px: z.number().positive(),
  rotation_deg: z.number(),
  gain: z.number().positive(),
});

export const shearSchema = z.object({
  dx_px: z.number(),
  dy_px: z.number(),
  dphi_deg: z.number(),
  residual_px: z.number(),
  n_markers: z.number().int(),
});

export const snapshotSchema = z.object({
  schema_version: z.number().int(),
  frame_index: z.number().int().nonnegative(),
  degraded: z.boolean(),
  error: z.string().nullable(),
  warnings: z.array(z.string()),
  depth: z.object({
    peak_mm: z.number(),
    small: z.array(z.array(z.number())).nullable(),
  }),
  markers: z.object({
    rest: z.array(xy).nullable(),
    pos: z.array(xy).nullable(),
    trust: z.array(z.boolean()).nullable(),
  }),
  shear: shearSchema.nullable(),
  sampled_mm: z.array(z.number()).length(N_PINS).nullable(),
  targets: z
    .object({
      extension_mm: z.array(z.number()).length(N_PINS),
      pulse_qus: z.array(z.number().int()).length(N_PINS),
    })
    .nullable(),
  display_mm: z.array(z.number()).length(N_PINS).nullable(),
  stage: z
    .object({
      theta: z.array(z.number()).length(3),
      pose: z.array(z.number()).length(3).nullable(),
    })
    .nullable(),
  grid: gridSchema.nullable(),
  timings_ms: z.record(z.string(), z.number()),
});

export type Snapshot = z.infer<typeof snapshotSchema>;
export type Grid = z.infer<typeof gridSchema>;

export const controlSchema = z.discriminatedUnion("type", [
  z.object({
    type: z.literal("set"),
    knob: z.enum(["gain", "spacing", "rotation", "center"]),
    value: z.union([z.number(), xy]),
  }),
  z.object({ type: z.literal("pause") }),
  z.object({ type: z.literal("resume") }),
  z.object({ type: z.literal("step") }),
  z.object({ type: z.literal("scenario"), name: z.string() }),
]);

export type Control = z.infer<typeof controlSchema>;

export const serverMessageSchema = z.discriminatedUnion("type", [
  z.object({ type: z.literal("snapshot"), data: z.unknown() }),
  z.object({
    type: z.literal("ack"),
    control: z.unknown(),
    message: z.string().optional(),
  }),
  z.object({
    type: z.literal("error"),
    control: z.unknown(),
    message: z.string().optional(),
  }),
]);

export type ServerMessage = z.infer<typeof serverMessageSchema>;

export type ParsedSnapshot =
  | { ok: true; snapshot: Snapshot }
  | { ok: false; reason: "schema-mismatch" | "invalid"; detail: string };

/** Validate a raw snapshot payload, distinguishing version skew from noise. */
export function parseSnapshot(raw: unknown): ParsedSnapshot {
  const version = (raw as { schema_version?: unknown })?.schema_version;
  if (typeof version === "number" && version !== SCHEMA_VERSION) {
    return {
      ok: false,
      reason: "schema-mismatch",
      detail: `stream is schema v${version}, console expects v${SCHEMA_VERSION}`,
    };
  }
  const result = snapshotSchema.safeParse(raw);
  if (!result.success) {
    return { ok: false, reason: "invalid", detail: result.error.message };
  }
  return { ok: true, snapshot: result.data };
}

export function parseServerMessage(raw: unknown): ServerMessage | null {
  const result = serverMessageSchema.safeParse(raw);
  return result.success ? result.data : null;
}
