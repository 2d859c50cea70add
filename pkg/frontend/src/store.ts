/**
 * Latest-value telemetry store.
 *
 * Subscriptions write here at whatever rate the bridge delivers; the render
 * loop reads at display rate.  Per-topic revision counters let panels skip
 * repaints when nothing changed, and a short arrival-time ring per topic
 * backs an observed-rate readout.
 */

export interface TopicSample {
  payload: Record<string, unknown>;
  stampNs: number;
  rev: number;
  count: number;
}

const RATE_RING = 128;

export class LatestStore {
  private samples = new Map<string, TopicSample>();
  private arrivals = new Map<string, number[]>();
  private _revision = 0;

  /** Global monotonic revision; bumps on every put. */
  get revision(): number {
    return this._revision;
  }

  put(topic: string, payload: Record<string, unknown>, stampNs: number,
      nowMs: number = Date.now()): void {
    this._revision += 1;
    const prior = this.samples.get(topic);
    this.samples.set(topic, {
      payload,
      stampNs,
      rev: this._revision,
      count: prior ? prior.count + 1 : 1,
    });
    let ring = this.arrivals.get(topic);
    if (ring === undefined) {
      ring = [];
      this.arrivals.set(topic, ring);
    }
    ring.push(nowMs);
    if (ring.length > RATE_RING) ring.splice(0, ring.length - RATE_RING);
  }

  get(topic: string): TopicSample | undefined {
    return this.samples.get(topic);
  }

  /** Messages per second over the trailing window (wall clock). */
  rateHz(topic: string, nowMs: number = Date.now(), windowMs = 2000): number {
    const ring = this.arrivals.get(topic);
    if (ring === undefined || ring.length === 0) return 0;
    const cutoff = nowMs - windowMs;
    let count = 0;
    for (let i = ring.length - 1; i >= 0; i--) {
      const t = ring[i];
      if (t === undefined || t < cutoff) break;
      count += 1;
    }
    return (count * 1000) / windowMs;
  }

  clear(): void {
    this.samples.clear();
    this.arrivals.clear();
  }
}
