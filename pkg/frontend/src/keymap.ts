/**
 * Keyboard piloting, same bindings as the terminal console:
 * w/s forward/back, a/d left/right, arrows climb/sink and turn,
 * g/h gimbal, t/l/space takeoff/land/halt.
 *
 * Browsers deliver real keydown/keyup pairs, so the deadman is simply
 * "any mapped key held"; no repeat-gap heuristics needed.
 */

import type { AxisName } from "./sticks";

/** KeyboardEvent.code -> (axis, sign). */
export const AXIS_KEYS: Readonly<Record<string, readonly [AxisName, 1 | -1]>> = {
  KeyW: ["x", 1],
  KeyS: ["x", -1],
  KeyD: ["y", 1],
  KeyA: ["y", -1],
  ArrowUp: ["z", 1],
  ArrowDown: ["z", -1],
  ArrowLeft: ["yaw", 1],
  ArrowRight: ["yaw", -1],
  KeyG: ["camera", 1],
  KeyH: ["camera", -1],
};

/** KeyboardEvent.code -> service call. */
export const SERVICE_KEYS: Readonly<Record<string, string>> = {
  KeyT: "drone/takeoff",
  KeyL: "drone/land",
  Space: "drone/halt",
};

const FULL_DEFLECTION = 100;

/** Tracks held keys and resolves them to stick axes. */
export class KeyboardSticks {
  private held = new Set<string>();

  /** Returns true when the code maps to an axis (caller preventDefaults). */
  keydown(code: string): boolean {
    if (!(code in AXIS_KEYS)) return false;
    this.held.add(code);
    return true;
  }

  keyup(code: string): boolean {
    return this.held.delete(code);
  }

  /** Drop everything held, e.g. when the window loses focus. */
  releaseAll(): void {
    this.held.clear();
  }

  active(): boolean {
    return this.held.size > 0;
  }

  axes(): Partial<Record<AxisName, number>> {
    const out: Partial<Record<AxisName, number>> = {};
    for (const code of this.held) {
      const entry = AXIS_KEYS[code];
      if (entry === undefined) continue;
      const [axis, sign] = entry;
      // Opposite keys cancel rather than fight.
      out[axis] = (out[axis] ?? 0) + sign * FULL_DEFLECTION;
    }
    return out;
  }
}
