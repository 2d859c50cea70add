import { describe, expect, it } from "vitest";

import { FlightTrace, fitTransform, toScreen,
         type Extent, type TracePoint } from "../src/trace";

const NS = 1e9;

function extentOf(pts: TracePoint[]): Extent {
  return {
    minN: Math.min(...pts.map((p) => p.n)),
    maxN: Math.max(...pts.map((p) => p.n)),
    minW: Math.min(...pts.map((p) => p.w)),
    maxW: Math.max(...pts.map((p) => p.w)),
  };
}

describe("FlightTrace integration", () => {
  it("integrates constant velocity into distance", () => {
    const trace = new FlightTrace();
    // 1 m/s north for 2 s at 10 Hz.
    for (let i = 0; i <= 20; i++) {
      trace.push(i * 0.1 * NS, 1.0, 0.0);
    }
    const p = trace.position();
    expect(p.n).toBeCloseTo(2.0, 6);
    expect(p.w).toBeCloseTo(0.0, 6);
  });

  it("integrates the westward component separately", () => {
    const trace = new FlightTrace();
    for (let i = 0; i <= 10; i++) {
      trace.push(i * 0.1 * NS, 0.0, -2.0); // 2 m/s east
    }
    const p = trace.position();
    expect(p.n).toBeCloseTo(0.0, 6);
    expect(p.w).toBeCloseTo(-2.0, 6);
  });

  it("skips integration across stamp gaps longer than a second", () => {
    const trace = new FlightTrace();
    trace.push(0, 1.0, 0.0);
    trace.push(0.1 * NS, 1.0, 0.0);
    trace.push(5 * NS, 1.0, 0.0); // 4.9 s dropout: no 4.9 m jump
    trace.push(5.1 * NS, 1.0, 0.0);
    expect(trace.position().n).toBeCloseTo(0.2, 6);
  });

  it("restarts the leg when stamps go backwards", () => {
    const trace = new FlightTrace();
    trace.push(0, 1.0, 0.0);
    trace.push(1 * NS, 1.0, 0.0);
    trace.push(0.2 * NS, 1.0, 0.0); // daemon restarted its clock
    trace.push(0.4 * NS, 1.0, 0.0);
    expect(trace.position().n).toBeCloseTo(1.2, 6);
  });

  it("caps retained points", () => {
    const trace = new FlightTrace();
    for (let i = 0; i < 10_000; i++) {
      trace.push(i * 0.02 * NS, 0.5, 0.0);
    }
    expect(trace.points().length).toBeLessThanOrEqual(4000);
  });

  it("reset returns the path to the origin", () => {
    const trace = new FlightTrace();
    trace.push(0, 1, 0);
    trace.push(NS, 1, 0);
    trace.reset();
    expect(trace.position()).toEqual({ n: 0, w: 0 });
    expect(trace.points()).toHaveLength(1);
  });
});

describe("map projection", () => {
  it("draws north up and east right", () => {
    const t = fitTransform(extentOf([{ n: 0, w: 0 }]), 200, 200);
    const origin = toScreen(t, { n: 0, w: 0 }, 200, 200);
    const north = toScreen(t, { n: 1, w: 0 }, 200, 200);
    const east = toScreen(t, { n: 0, w: -1 }, 200, 200); // east = -west
    expect(north[1]).toBeLessThan(origin[1]); // up on screen
    expect(north[0]).toBeCloseTo(origin[0], 6);
    expect(east[0]).toBeGreaterThan(origin[0]); // right on screen
    expect(east[1]).toBeCloseTo(origin[1], 6);
  });

  it("keeps the fitted path inside the viewport", () => {
    const pts = [
      { n: -12, w: 4 },
      { n: 30, w: -18 },
      { n: 5, w: 22 },
    ];
    const t = fitTransform(extentOf(pts), 280, 280);
    for (const p of pts) {
      const [sx, sy] = toScreen(t, p, 280, 280);
      expect(sx).toBeGreaterThanOrEqual(0);
      expect(sx).toBeLessThanOrEqual(280);
      expect(sy).toBeGreaterThanOrEqual(0);
      expect(sy).toBeLessThanOrEqual(280);
    }
  });

  it("imposes a minimum world span so a hovering drone is not zoomed to noise", () => {
    const t = fitTransform(extentOf([{ n: 0.001, w: -0.002 }]), 280, 280);
    // 10 m minimum span across 240 usable px -> scale <= 24 px/m.
    expect(t.scale).toBeLessThanOrEqual(24 + 1e-9);
  });
});
