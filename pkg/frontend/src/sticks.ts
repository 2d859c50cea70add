/**
 * Stick state and the 20 Hz command pump.
 *
 * Input sources (keyboard, two on-screen pads) merge into one set of axes.
 * The pump emits full SkycontrollerCommand frames only while a deadman is
 * active (key held or pointer captured); on release it sends exactly one
 * all-zero frame so the drone brakes to a hover, then goes quiet.
 */

import { clampAxis, zeroSticks, type StickPayload } from "./protocol";

export type AxisName = "x" | "y" | "z" | "yaw" | "camera" | "zoom";

export const PUBLISH_PERIOD_MS = 50; // 20 Hz

export interface AxesState {
  x: number;
  y: number;
  z: number;
  yaw: number;
  camera: number;
  zoom: number;
}

export function zeroAxes(): AxesState {
  return { x: 0, y: 0, z: 0, yaw: 0, camera: 0, zoom: 0 };
}

interface Source {
  active: boolean;
  axes: Partial<Record<AxisName, number>>;
}

/** Merged view over every piloting input source. */
export class StickModel {
  private sources = new Map<string, Source>();

  /**
   * Replace one source's contribution.  `active: false` with empty axes
   * removes it from the deadman entirely (key released, pointer dropped).
   */
  setSource(name: string, active: boolean,
            axes: Partial<Record<AxisName, number>> = {}): void {
    if (!active && Object.keys(axes).length === 0) {
      this.sources.delete(name);
      return;
    }
    this.sources.set(name, { active, axes });
  }

  clearSource(name: string): void {
    this.sources.delete(name);
  }

  deadman(): boolean {
    for (const source of this.sources.values()) {
      if (source.active) return true;
    }
    return false;
  }

  axes(): AxesState {
    const out = zeroAxes();
    for (const source of this.sources.values()) {
      if (!source.active) continue;
      for (const [axis, value] of Object.entries(source.axes)) {
        out[axis as AxisName] += value;
      }
    }
    out.x = clampAxis(out.x);
    out.y = clampAxis(out.y);
    out.z = clampAxis(out.z);
    out.yaw = clampAxis(out.yaw);
    out.camera = clampAxis(out.camera);
    out.zoom = clampAxis(out.zoom);
    return out;
  }

  payload(): StickPayload {
    const axes = this.axes();
    const frame = zeroSticks();
    frame.x = axes.x;
    frame.y = axes.y;
    frame.z = axes.z;
    frame.yaw = axes.yaw;
    frame.camera = axes.camera;
    frame.zoom = axes.zoom;
    return frame;
  }
}

/**
 * Drives stick publishing off an external timer: call tick(now) at least as
 * often as the publish period.  No frames leave without the deadman; the
 * release edge emits a single zero frame.
 */
export class CommandPump {
  framesSent = 0;
  private lastSent = -Infinity;
  private wasActive = false;

  constructor(
    private readonly model: StickModel,
    private readonly send: (frame: StickPayload) => void,
    private readonly periodMs: number = PUBLISH_PERIOD_MS,
  ) {}

  /** True while the pump is emitting (deadman held). */
  active(): boolean {
    return this.wasActive;
  }

  tick(nowMs: number): void {
    const active = this.model.deadman();
    if (active) {
      if (nowMs - this.lastSent >= this.periodMs) {
        this.send(this.model.payload());
        this.framesSent += 1;
        this.lastSent = nowMs;
      }
      this.wasActive = true;
      return;
    }
    if (this.wasActive) {
      this.send(zeroSticks());
      this.framesSent += 1;
      this.lastSent = nowMs;
      this.wasActive = false;
    }
  }
}
