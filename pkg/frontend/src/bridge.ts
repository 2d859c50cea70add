/**
 * WebSocket link to one drone behind the daemon's browser bridge.
 *
 * The bridge speaks the same envelopes as the TCP ports with channels
 * prefixed by the drone name; fleet/info is the one bare channel.  The
 * link resubscribes after every reconnect, correlates replies by the
 * mirrored sequence number, and never blocks rendering: telemetry lands
 * in callbacks that overwrite latest values.
 */

import {
  decodeEnvelope,
  encodeEnvelope,
  prefixChannel,
  unprefixChannel,
  type Envelope,
  type Kind,
} from "./protocol";

export type LinkStatus = "connecting" | "open" | "closed";

export type TopicCallback = (payload: Record<string, unknown>,
                             stampNs: number) => void;

/** Structural WebSocket so the browser class and test doubles both fit. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LinkOptions {
  url: string;
  drone: string;
  socketFactory?: SocketFactory;
  reconnectMinMs?: number;
  reconnectMaxMs?: number;
  requestTimeoutMs?: number;
}

interface Pending {
  resolve: (payload: Record<string, unknown>) => void;
  reject: (err: Error) => void;
  timer: ReturnType<typeof setTimeout>;
}

export class RequestError extends Error {}

export class RequestTimeout extends RequestError {}

const DEFAULT_TIMEOUT_MS = 5000;

export class DroneLink {
  readonly drone: string;

  private readonly url: string;
  private readonly makeSocket: SocketFactory;
  private readonly reconnectMin: number;
  private readonly reconnectMax: number;
  private readonly requestTimeout: number;

  private socket: SocketLike | null = null;
  private seq = 0;
  private pending = new Map<number, Pending>();
  private topics = new Map<string, TopicCallback[]>();
  private statusListeners: ((s: LinkStatus) => void)[] = [];
  private errorListeners: ((message: string) => void)[] = [];
  private stopped = true;
  private backoff: number;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private _status: LinkStatus = "closed";

  constructor(opts: LinkOptions) {
    this.url = opts.url;
    this.drone = opts.drone;
    this.makeSocket = opts.socketFactory
      ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
    this.reconnectMin = opts.reconnectMinMs ?? 500;
    this.reconnectMax = opts.reconnectMaxMs ?? 4000;
    this.requestTimeout = opts.requestTimeoutMs ?? DEFAULT_TIMEOUT_MS;
    this.backoff = this.reconnectMin;
  }

  get status(): LinkStatus {
    return this._status;
  }

  onStatus(cb: (s: LinkStatus) => void): void {
    this.statusListeners.push(cb);
  }

  onError(cb: (message: string) => void): void {
    this.errorListeners.push(cb);
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    const socket = this.socket;
    this.socket = null;
    if (socket !== null) {
      socket.onclose = null;
      socket.onerror = null;
      socket.onmessage = null;
      socket.onopen = null;
      try {
        socket.close();
      } catch {
        // already dead
      }
    }
    this.failPending(new RequestError("link stopped"));
    this.setStatus("closed");
  }

  /** Register a telemetry callback; SUB goes out now and on reconnects. */
  subscribe(topic: string, cb: TopicCallback): void {
    let list = this.topics.get(topic);
    if (list === undefined) {
      list = [];
      this.topics.set(topic, list);
      if (this._status === "open") this.sendSub(topic);
    }
    list.push(cb);
  }

  publish(topic: string, payload: Record<string, unknown>): boolean {
    return this.sendEnvelope("PUB", prefixChannel(this.drone, topic), payload);
  }

  call(service: string,
       payload: Record<string, unknown> = {}): Promise<Record<string, unknown>> {
    return this.request("REQ", prefixChannel(this.drone, service), payload);
  }

  async paramGet(name: string): Promise<unknown> {
    const reply = await this.request(
      "PARAM_GET", prefixChannel(this.drone, name), {});
    return reply.value;
  }

  async paramSet(name: string, value: unknown): Promise<unknown> {
    const reply = await this.request(
      "PARAM_SET", prefixChannel(this.drone, name), { value });
    return reply.value;
  }

  /** Fleet discovery rides the bare channel, no drone prefix. */
  async fleetInfo(): Promise<{ name: string; model: string; port: number }[]> {
    const reply = await this.request("REQ", "fleet/info", {});
    const drones = reply.drones;
    if (!Array.isArray(drones)) return [];
    return drones as { name: string; model: string; port: number }[];
  }

  request(kind: Kind, channel: string,
          payload: Record<string, unknown>): Promise<Record<string, unknown>> {
    return new Promise((resolve, reject) => {
      if (this._status !== "open" || this.socket === null) {
        reject(new RequestError("link is not open"));
        return;
      }
      const seq = this.nextSeq();
      const timer = setTimeout(() => {
        this.pending.delete(seq);
        reject(new RequestTimeout(`${channel} timed out`));
      }, this.requestTimeout);
      this.pending.set(seq, { resolve, reject, timer });
      const text = encodeEnvelope({ kind, channel, seq, stamp: 0, payload });
      try {
        this.socket.send(text);
      } catch (err) {
        clearTimeout(timer);
        this.pending.delete(seq);
        reject(new RequestError(String(err)));
      }
    });
  }

  // -- internals ----------------------------------------------------------

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  private setStatus(s: LinkStatus): void {
    if (s === this._status) return;
    this._status = s;
    for (const cb of this.statusListeners) cb(s);
  }

  private emitError(message: string): void {
    for (const cb of this.errorListeners) cb(message);
  }

  private connect(): void {
    if (this.stopped) return;
    this.setStatus("connecting");
    let socket: SocketLike;
    try {
      socket = this.makeSocket(this.url);
    } catch (err) {
      this.emitError(`connect failed: ${String(err)}`);
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.backoff = this.reconnectMin;
      this.setStatus("open");
      for (const topic of this.topics.keys()) this.sendSub(topic);
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") this.handleFrame(ev.data);
    };
    socket.onerror = () => {
      // onclose follows; nothing useful in the event itself
    };
    socket.onclose = () => {
      if (this.socket === socket) this.socket = null;
      this.failPending(new RequestError("connection lost"));
      if (!this.stopped) {
        this.setStatus("connecting");
        this.scheduleReconnect();
      } else {
        this.setStatus("closed");
      }
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.reconnectTimer !== null) return;
    const delay = this.backoff;
    this.backoff = Math.min(this.backoff * 2, this.reconnectMax);
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
  }

  private failPending(err: Error): void {
    for (const entry of this.pending.values()) {
      clearTimeout(entry.timer);
      entry.reject(err);
    }
    this.pending.clear();
  }

  private sendSub(topic: string): void {
    this.sendEnvelope("SUB", prefixChannel(this.drone, topic), {});
  }

  private sendEnvelope(kind: Kind, channel: string,
                       payload: Record<string, unknown>): boolean {
    if (this._status !== "open" || this.socket === null) return false;
    try {
      this.socket.send(encodeEnvelope(
        { kind, channel, seq: this.nextSeq(), stamp: 0, payload }));
      return true;
    } catch {
      return false;
    }
  }

  private handleFrame(text: string): void {
    const env = decodeEnvelope(text);
    if (env === null) {
      this.emitError("unreadable frame from bridge");
      return;
    }
    switch (env.kind) {
      case "PUB":
        this.routePublish(env);
        return;
      case "REP":
      case "PARAM_VAL": {
        const entry = this.pending.get(env.seq);
        if (entry !== undefined) {
          this.pending.delete(env.seq);
          clearTimeout(entry.timer);
          entry.resolve(env.payload);
        }
        return;
      }
      case "ERR": {
        const entry = this.pending.get(env.seq);
        const message = typeof env.payload.error === "string"
          ? env.payload.error
          : "request failed";
        if (entry !== undefined && env.channel !== "protocol") {
          this.pending.delete(env.seq);
          clearTimeout(entry.timer);
          entry.reject(new RequestError(message));
        } else {
          this.emitError(message);
        }
        return;
      }
      default:
        // SUB/UNSUB/REQ echoes are not expected from the server
        return;
    }
  }

  private routePublish(env: Envelope): void {
    const topic = unprefixChannel(this.drone, env.channel);
    if (topic === null) return;
    const list = this.topics.get(topic);
    if (list === undefined) return;
    const stamp = typeof env.payload.stamp === "number" ? env.payload.stamp : 0;
    for (const cb of list) cb(env.payload, stamp);
  }
}
