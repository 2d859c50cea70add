import { describe, expect, it } from "vitest";

import { LatestStore } from "../src/store";

describe("LatestStore", () => {
  it("keeps only the newest sample per topic", () => {
    const store = new LatestStore();
    store.put("drone/altitude", { data: 1.0 }, 100, 0);
    store.put("drone/altitude", { data: 2.5 }, 200, 10);
    const s = store.get("drone/altitude");
    expect(s?.payload).toEqual({ data: 2.5 });
    expect(s?.stampNs).toBe(200);
    expect(s?.count).toBe(2);
  });

  it("bumps the global revision on every put", () => {
    const store = new LatestStore();
    const r0 = store.revision;
    store.put("a", {}, 0, 0);
    store.put("b", {}, 0, 0);
    expect(store.revision).toBe(r0 + 2);
  });

  it("measures arrival rate over a trailing window", () => {
    const store = new LatestStore();
    // 30 Hz for two seconds of wall time.
    for (let i = 0; i < 60; i++) {
      store.put("drone/rpy", { x: 0 }, i, 1000 + i * (1000 / 30));
    }
    const now = 1000 + 59 * (1000 / 30);
    const hz = store.rateHz("drone/rpy", now, 2000);
    expect(hz).toBeGreaterThan(25);
    expect(hz).toBeLessThan(35);
  });

  it("reports zero rate for unknown or stale topics", () => {
    const store = new LatestStore();
    expect(store.rateHz("nope", 1000)).toBe(0);
    store.put("drone/rpy", {}, 0, 0);
    expect(store.rateHz("drone/rpy", 60_000, 2000)).toBe(0);
  });

  it("clears all samples", () => {
    const store = new LatestStore();
    store.put("a", { data: 1 }, 0, 0);
    store.clear();
    expect(store.get("a")).toBeUndefined();
  });
});
