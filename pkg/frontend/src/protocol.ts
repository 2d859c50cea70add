/**
 * JSON envelope protocol spoken by the daemon's WebSocket bridge.
 *
 * Every message is one text frame holding one envelope:
 *   {"kind": ..., "channel": ..., "seq": ..., "stamp": ..., "payload": {...}}
 * Channels carry a "drone-name/" prefix on the bridge; the fleet discovery
 * service (fleet/info) is the one unprefixed channel.  Angles on the wire
 * are degrees, payload stamps are simulation time in nanoseconds.
 */

export const KINDS = [
  "PUB",
  "SUB",
  "UNSUB",
  "REQ",
  "REP",
  "PARAM_SET",
  "PARAM_GET",
  "PARAM_VAL",
  "ERR",
] as const;

export type Kind = (typeof KINDS)[number];

export interface Envelope {
  kind: Kind;
  channel: string;
  seq: number;
  stamp: number;
  payload: Record<string, unknown>;
}

const KIND_SET: ReadonlySet<string> = new Set(KINDS);

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify({
    kind: env.kind,
    channel: env.channel,
    seq: env.seq,
    stamp: env.stamp,
    payload: env.payload,
  });
}

/** Parse one inbound frame; returns null for anything malformed. */
export function decodeEnvelope(text: string): Envelope | null {
  let body: unknown;
  try {
    body = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    return null;
  }
  const rec = body as Record<string, unknown>;
  const { kind, channel, seq, stamp, payload } = rec;
  if (typeof kind !== "string" || !KIND_SET.has(kind)) return null;
  if (typeof channel !== "string" || channel.length === 0) return null;
  if (typeof seq !== "number" || !Number.isInteger(seq) || seq < 0) return null;
  if (typeof stamp !== "number" || stamp < 0) return null;
  if (typeof payload !== "object" || payload === null || Array.isArray(payload)) {
    return null;
  }
  return {
    kind: kind as Kind,
    channel,
    seq,
    stamp,
    payload: payload as Record<string, unknown>,
  };
}

export function prefixChannel(drone: string, channel: string): string {
  return drone + "/" + channel;
}

/** Strip "drone/" from an inbound channel; null if it is for someone else. */
export function unprefixChannel(drone: string, channel: string): string | null {
  const head = drone + "/";
  if (channel.startsWith(head)) return channel.slice(head.length);
  return null;
}

/** Virtual stick frame; the daemon rejects payloads missing any field. */
export interface StickPayload {
  x: number; // pitch axis, + flies forward
  y: number; // roll axis, + rolls right
  z: number; // vertical axis, + climbs
  yaw: number; // + turns left (counterclockwise)
  camera: number; // gimbal pitch axis
  zoom: number;
  return_home: boolean;
  takeoff_land: boolean;
  reset_camera: boolean;
  reset_zoom: boolean;
  [key: string]: number | boolean;
}

export function zeroSticks(): StickPayload {
  return {
    x: 0,
    y: 0,
    z: 0,
    yaw: 0,
    camera: 0,
    zoom: 0,
    return_home: false,
    takeoff_land: false,
    reset_camera: false,
    reset_zoom: false,
  };
}

/** Stick axes ride the wire as integers in [-100, 100]. */
export function clampAxis(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.max(-100, Math.min(100, Math.round(value)));
}
