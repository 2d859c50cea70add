/**
 * Top-down flight trace integrated from velocity telemetry.
 *
 * The local frame is north/west/up: speed x is north, y is west, yaw 0
 * points north with positive angles turning counterclockwise (toward
 * west).  Screen mapping keeps north up and east to the right.
 */

export interface TracePoint {
  n: number; // meters north of start
  w: number; // meters west of start
}

export interface Extent {
  minN: number;
  maxN: number;
  minW: number;
  maxW: number;
}

const MAX_POINTS = 4000;
const MAX_GAP_S = 1.0; // stale stream: do not integrate across long holes

export class FlightTrace {
  private pts: TracePoint[] = [{ n: 0, w: 0 }];
  private lastStampNs: number | null = null;

  /** Feed one velocity sample (m/s north/west) stamped in sim nanoseconds. */
  push(stampNs: number, vn: number, vw: number): void {
    if (this.lastStampNs !== null) {
      const dt = (stampNs - this.lastStampNs) / 1e9;
      if (dt > 0 && dt <= MAX_GAP_S) {
        const last = this.pts[this.pts.length - 1]!;
        this.pts.push({ n: last.n + vn * dt, w: last.w + vw * dt });
        if (this.pts.length > MAX_POINTS) {
          this.pts.splice(0, this.pts.length - MAX_POINTS);
        }
      } else if (dt < 0) {
        // Sim restarted behind us; start a fresh leg from the current point.
        this.lastStampNs = stampNs;
        return;
      }
    }
    this.lastStampNs = stampNs;
  }

  points(): readonly TracePoint[] {
    return this.pts;
  }

  position(): TracePoint {
    return this.pts[this.pts.length - 1]!;
  }

  reset(): void {
    this.pts = [{ n: 0, w: 0 }];
    this.lastStampNs = null;
  }

  extent(): Extent {
    let minN = Infinity;
    let maxN = -Infinity;
    let minW = Infinity;
    let maxW = -Infinity;
    for (const p of this.pts) {
      if (p.n < minN) minN = p.n;
      if (p.n > maxN) maxN = p.n;
      if (p.w < minW) minW = p.w;
      if (p.w > maxW) maxW = p.w;
    }
    return { minN, maxN, minW, maxW };
  }
}

export interface MapTransform {
  scale: number; // px per meter
  cn: number; // world center, north
  cw: number; // world center, west
}

/** Fit the extent into a w x h viewport with padding, min span 10 m. */
export function fitTransform(extent: Extent, width: number, height: number,
                             pad = 20): MapTransform {
  const spanN = Math.max(extent.maxN - extent.minN, 10);
  const spanW = Math.max(extent.maxW - extent.minW, 10);
  const scale = Math.min((width - 2 * pad) / spanW, (height - 2 * pad) / spanN);
  return {
    scale,
    cn: (extent.minN + extent.maxN) / 2,
    cw: (extent.minW + extent.maxW) / 2,
  };
}

/** World (north, west) to screen px; north up, east right. */
export function toScreen(t: MapTransform, p: TracePoint, width: number,
                         height: number): [number, number] {
  return [
    width / 2 - (p.w - t.cw) * t.scale,
    height / 2 - (p.n - t.cn) * t.scale,
  ];
}

export function drawTrace(ctx: CanvasRenderingContext2D, width: number,
                          height: number, trace: FlightTrace,
                          yawDeg: number): void {
  ctx.clearRect(0, 0, width, height);
  const t = fitTransform(trace.extent(), width, height);

  // Grid every 5 m.
  ctx.strokeStyle = "#2a2a2a";
  ctx.lineWidth = 1;
  const step = 5 * t.scale;
  if (step > 8) {
    const [ox, oy] = toScreen(t, { n: 0, w: 0 }, width, height);
    for (let x = ox % step; x < width; x += step) {
      ctx.beginPath();
      ctx.moveTo(x, 0);
      ctx.lineTo(x, height);
      ctx.stroke();
    }
    for (let y = oy % step; y < height; y += step) {
      ctx.beginPath();
      ctx.moveTo(0, y);
      ctx.lineTo(width, y);
      ctx.stroke();
    }
  }

  // Start marker.
  const [sx, sy] = toScreen(t, { n: 0, w: 0 }, width, height);
  ctx.strokeStyle = "#5a8a5a";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(sx, sy, 5, 0, Math.PI * 2);
  ctx.stroke();

  // Path.
  const pts = trace.points();
  ctx.strokeStyle = "#4aa3ff";
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach((p, idx) => {
    const [x, y] = toScreen(t, p, width, height);
    if (idx === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();

  // Vehicle with heading (yaw 0 = north/up, positive turns left).
  const [vx, vy] = toScreen(t, trace.position(), width, height);
  const rad = (yawDeg * Math.PI) / 180;
  const hx = -Math.sin(rad);
  const hy = -Math.cos(rad);
  ctx.fillStyle = "#ffd24a";
  ctx.beginPath();
  ctx.moveTo(vx + hx * 10, vy + hy * 10);
  ctx.lineTo(vx - hy * 5 - hx * 6, vy + hx * 5 - hy * 6);
  ctx.lineTo(vx + hy * 5 - hx * 6, vy - hx * 5 - hy * 6);
  ctx.closePath();
  ctx.fill();

  // Scale legend.
  ctx.fillStyle = "#888";
  ctx.font = "10px system-ui, sans-serif";
  ctx.textAlign = "left";
  ctx.fillText("5 m grid", 8, height - 8);
}
