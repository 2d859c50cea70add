import { describe, expect, it } from "vitest";

import { DroneLink, RequestError, RequestTimeout,
         type SocketLike } from "../src/bridge";
import type { Envelope } from "../src/protocol";

class FakeSocket implements SocketLike {
  sent: Envelope[] = [];
  closeCalls = 0;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  send(data: string): void {
    this.sent.push(JSON.parse(data) as Envelope);
  }

  close(): void {
    this.closeCalls += 1;
  }

  // -- test-side controls --
  open(): void {
    this.onopen?.();
  }

  receive(env: Envelope): void {
    this.onmessage?.({ data: JSON.stringify(env) });
  }

  receiveRaw(data: unknown): void {
    this.onmessage?.({ data });
  }

  dropConnection(): void {
    this.onclose?.();
  }

  lastSent(): Envelope {
    const env = this.sent[this.sent.length - 1];
    if (env === undefined) throw new Error("nothing sent");
    return env;
  }
}

function harness(drone = "alpha") {
  const sockets: FakeSocket[] = [];
  const link = new DroneLink({
    url: "ws://test",
    drone,
    socketFactory: () => {
      const s = new FakeSocket();
      sockets.push(s);
      return s;
    },
    reconnectMinMs: 10,
    reconnectMaxMs: 40,
    requestTimeoutMs: 200,
  });
  return { link, sockets };
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

describe("subscription lifecycle", () => {
  it("sends SUB for registered topics when the socket opens", () => {
    const { link, sockets } = harness();
    link.subscribe("drone/rpy", () => {});
    link.subscribe("battery/percentage", () => {});
    link.start();
    const sock = sockets[0]!;
    expect(sock.sent).toHaveLength(0); // nothing before open
    sock.open();
    expect(sock.sent.map((e) => [e.kind, e.channel])).toEqual([
      ["SUB", "alpha/drone/rpy"],
      ["SUB", "alpha/battery/percentage"],
    ]);
    link.stop();
  });

  it("sends SUB immediately for topics added while open", () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    link.subscribe("drone/state", () => {});
    expect(sockets[0]!.lastSent()).toMatchObject(
      { kind: "SUB", channel: "alpha/drone/state" });
    link.stop();
  });

  it("resubscribes everything after a reconnect", async () => {
    const { link, sockets } = harness();
    link.subscribe("drone/rpy", () => {});
    link.start();
    sockets[0]!.open();
    sockets[0]!.dropConnection();
    await sleep(30); // past the 10 ms backoff
    expect(sockets.length).toBe(2);
    sockets[1]!.open();
    expect(sockets[1]!.sent.map((e) => [e.kind, e.channel])).toEqual([
      ["SUB", "alpha/drone/rpy"],
    ]);
    expect(link.status).toBe("open");
    link.stop();
  });
});

describe("telemetry routing", () => {
  it("routes PUB frames to the topic callback with the payload stamp", () => {
    const { link, sockets } = harness();
    const got: Array<[Record<string, unknown>, number]> = [];
    link.subscribe("drone/rpy", (p, s) => got.push([p, s]));
    link.start();
    sockets[0]!.open();
    sockets[0]!.receive({
      kind: "PUB", channel: "alpha/drone/rpy", seq: 9, stamp: 0,
      payload: { stamp: 123_000_000, x: 1, y: 2, z: 3 },
    });
    expect(got).toHaveLength(1);
    expect(got[0]![0]).toMatchObject({ x: 1, y: 2, z: 3 });
    expect(got[0]![1]).toBe(123_000_000);
    link.stop();
  });

  it("ignores frames for other drones and unknown topics", () => {
    const { link, sockets } = harness();
    let calls = 0;
    link.subscribe("drone/rpy", () => { calls += 1; });
    link.start();
    sockets[0]!.open();
    sockets[0]!.receive({
      kind: "PUB", channel: "bravo/drone/rpy", seq: 1, stamp: 0,
      payload: { x: 0 },
    });
    sockets[0]!.receive({
      kind: "PUB", channel: "alpha/drone/speed", seq: 2, stamp: 0,
      payload: { x: 0 },
    });
    expect(calls).toBe(0);
    link.stop();
  });

  it("reports unreadable frames instead of throwing", () => {
    const { link, sockets } = harness();
    const errors: string[] = [];
    link.onError((m) => errors.push(m));
    link.start();
    sockets[0]!.open();
    sockets[0]!.receiveRaw("{{{");
    expect(errors).toHaveLength(1);
    link.stop();
  });
});

describe("request correlation", () => {
  it("resolves a service call from the seq-mirrored REP", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    const promise = link.call("drone/takeoff");
    const sent = sockets[0]!.lastSent();
    expect(sent).toMatchObject({ kind: "REQ", channel: "alpha/drone/takeoff" });
    sockets[0]!.receive({
      kind: "REP", channel: sent.channel, seq: sent.seq, stamp: 0,
      payload: { success: true, message: "climbing" },
    });
    await expect(promise).resolves.toMatchObject({ success: true });
    link.stop();
  });

  it("resolves paramGet/paramSet from PARAM_VAL", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();

    const getP = link.paramGet("drone/max_pitch_roll");
    let sent = sockets[0]!.lastSent();
    expect(sent).toMatchObject(
      { kind: "PARAM_GET", channel: "alpha/drone/max_pitch_roll", payload: {} });
    sockets[0]!.receive({
      kind: "PARAM_VAL", channel: sent.channel, seq: sent.seq, stamp: 0,
      payload: { value: 10.0 },
    });
    await expect(getP).resolves.toBe(10.0);

    const setP = link.paramSet("drone/max_pitch_roll", 50);
    sent = sockets[0]!.lastSent();
    expect(sent.payload).toEqual({ value: 50 });
    sockets[0]!.receive({
      kind: "PARAM_VAL", channel: sent.channel, seq: sent.seq, stamp: 0,
      payload: { value: 40.0 }, // daemon clamps to the documented range
    });
    await expect(setP).resolves.toBe(40.0);
    link.stop();
  });

  it("asks for the fleet roster on the bare channel", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    const promise = link.fleetInfo();
    const sent = sockets[0]!.lastSent();
    expect(sent.channel).toBe("fleet/info");
    sockets[0]!.receive({
      kind: "REP", channel: "fleet/info", seq: sent.seq, stamp: 0,
      payload: {
        success: true, message: "",
        drones: [{ name: "alpha", model: "4k", port: 9001 }],
      },
    });
    await expect(promise).resolves.toEqual(
      [{ name: "alpha", model: "4k", port: 9001 }]);
    link.stop();
  });

  it("rejects on a seq-addressed ERR", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    const promise = link.call("drone/takeoff");
    const sent = sockets[0]!.lastSent();
    sockets[0]!.receive({
      kind: "ERR", channel: sent.channel, seq: sent.seq, stamp: 0,
      payload: { error: "not ready" },
    });
    await expect(promise).rejects.toThrowError("not ready");
    await expect(promise).rejects.toBeInstanceOf(RequestError);
    link.stop();
  });

  it("routes protocol-channel ERR to the error feed, not the pending call", async () => {
    const { link, sockets } = harness();
    const errors: string[] = [];
    link.onError((m) => errors.push(m));
    link.start();
    sockets[0]!.open();
    const promise = link.call("drone/takeoff");
    const sent = sockets[0]!.lastSent();
    // Envelope-level rejection: server-fresh seq may collide with ours,
    // but the channel marks it as not-a-reply.
    sockets[0]!.receive({
      kind: "ERR", channel: "protocol", seq: sent.seq, stamp: 0,
      payload: { error: "malformed frame" },
    });
    expect(errors).toEqual(["malformed frame"]);
    sockets[0]!.receive({
      kind: "REP", channel: sent.channel, seq: sent.seq, stamp: 0,
      payload: { success: true, message: "" },
    });
    await expect(promise).resolves.toMatchObject({ success: true });
    link.stop();
  });

  it("times out a reply that never comes", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    const promise = link.call("drone/takeoff");
    await expect(promise).rejects.toBeInstanceOf(RequestTimeout);
    link.stop();
  });

  it("fails pending requests when the connection drops", async () => {
    const { link, sockets } = harness();
    link.start();
    sockets[0]!.open();
    const promise = link.call("drone/takeoff");
    sockets[0]!.dropConnection();
    await expect(promise).rejects.toThrowError("connection lost");
    link.stop();
  });

  it("rejects instead of queueing when the link is not open", async () => {
    const { link } = harness();
    await expect(link.call("drone/takeoff")).rejects.toBeInstanceOf(RequestError);
  });
});

describe("publishing", () => {
  it("prefixes the drone name and reports delivery", () => {
    const { link, sockets } = harness();
    link.start();
    expect(link.publish("skycontroller/command", { x: 0 })).toBe(false);
    sockets[0]!.open();
    expect(link.publish("skycontroller/command", { x: 10 })).toBe(true);
    expect(sockets[0]!.lastSent()).toMatchObject({
      kind: "PUB",
      channel: "alpha/skycontroller/command",
      payload: { x: 10 },
    });
    link.stop();
  });

  it("stop() closes the socket and reports closed status", () => {
    const { link, sockets } = harness();
    const statuses: string[] = [];
    link.onStatus((s) => statuses.push(s));
    link.start();
    sockets[0]!.open();
    link.stop();
    expect(sockets[0]!.closeCalls).toBe(1);
    expect(statuses).toEqual(["connecting", "open", "closed"]);
    expect(link.publish("drone/command", {})).toBe(false);
  });
});
