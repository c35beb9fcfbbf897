/**
 * Control-knob bookkeeping: clamp values to the advertised bounds before
 * sending, keep at most one in-flight message per knob, and collapse rapid
 * edits to last-writer-wins while a reply is outstanding.
 */
import { Control, FRAME_HEIGHT, FRAME_WIDTH } from "./schema.js";

export type KnobName = "gain" | "spacing" | "rotation" | "center";
export type KnobValue = number | [number, number];

export const KNOB_BOUNDS: Record<"gain" | "spacing", [number, number]> = {
  gain: [0.1, 5.0],
  spacing: [5.0, 60.0],
};

function clampNumber(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, value));
}

/** Keep a dragged grid center inside the frame. */
export function clampCenter(value: [number, number]): [number, number] {
  return [
    clampNumber(value[0], 0, FRAME_WIDTH - 1),
    clampNumber(value[1], 0, FRAME_HEIGHT - 1),
  ];
}

export function clampKnob(knob: KnobName, value: KnobValue): KnobValue {
  if (knob === "center") {
    if (!Array.isArray(value)) throw new Error("center expects [x, y]");
    return clampCenter(value);
  }
  if (Array.isArray(value)) throw new Error(`${knob} expects a number`);
  if (knob === "rotation") return value;
  const [lo, hi] = KNOB_BOUNDS[knob];
  return clampNumber(value, lo, hi);
}

export class ControlTracker {
  private inFlight = new Map<KnobName, KnobValue>();
  private pending = new Map<KnobName, KnobValue>();

  constructor(private readonly send: (control: Control) => void) {}

  /** Request a knob change; queued (last writer wins) if one is in flight. */
  set(knob: KnobName, value: KnobValue): void {
    const clamped = clampKnob(knob, value);
    if (this.inFlight.has(knob)) {
      this.pending.set(knob, clamped);
      return;
    }
    this.dispatch(knob, clamped);
  }

  /** Feed every ack/error reply back; releases the knob and flushes edits. */
  onReply(control: unknown): void {
    const msg = control as { type?: string; knob?: KnobName };
    if (msg?.type !== "set" || msg.knob === undefined) return;
    this.inFlight.delete(msg.knob);
    const queued = this.pending.get(msg.knob);
    if (queued !== undefined) {
      this.pending.delete(msg.knob);
      this.dispatch(msg.knob, queued);
    }
  }

  /** True while the knob's last edit has not been acknowledged. */
  isPending(knob: KnobName): boolean {
    return this.inFlight.has(knob) || this.pending.has(knob);
  }

  private dispatch(knob: KnobName, value: KnobValue): void {
    this.inFlight.set(knob, value);
    this.send({ type: "set", knob, value });
  }
}
