/**
 * Attitude display: quaternion decoding plus a canvas artificial horizon.
 *
 * Angles are degrees end to end, matching the wire.  Euler order is the
 * aerospace yaw-pitch-roll convention used by the telemetry source.
 */

export interface EulerDeg {
  roll: number;
  pitch: number;
  yaw: number;
}

const RAD2DEG = 180 / Math.PI;

function wrapDeg(a: number): number {
  let v = a % 360;
  if (v > 180) v -= 360;
  if (v <= -180) v += 360;
  return v;
}

export function quatToEulerDeg(w: number, x: number, y: number,
                               z: number): EulerDeg {
  const norm = Math.hypot(w, x, y, z) || 1;
  w /= norm;
  x /= norm;
  y /= norm;
  z /= norm;
  const sinp = Math.max(-1, Math.min(1, 2 * (w * y - z * x)));
  return {
    roll: Math.atan2(2 * (w * x + y * z), 1 - 2 * (x * x + y * y)) * RAD2DEG,
    pitch: Math.asin(sinp) * RAD2DEG,
    yaw: Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z)) * RAD2DEG,
  };
}

/**
 * Undo the roll/yaw flip that encodes pitch past +/-90 degrees.  A camera
 * gimbal keeps roll stabilized near level, so a decoded roll beyond 90 can
 * only mean the pitch crossed a pole and landed on the flipped branch.
 * Needed for airframes whose gimbal travels to -116/+176 degrees.
 */
export function unfoldGimbalDeg(e: EulerDeg): EulerDeg {
  if (Math.abs(e.roll) < 90) return e;
  const sign = (v: number) => (v >= 0 ? 180 : -180);
  return {
    roll: wrapDeg(e.roll - sign(e.roll)),
    pitch: sign(e.pitch) - e.pitch,
    yaw: wrapDeg(e.yaw - sign(e.yaw)),
  };
}

export const PITCH_PX_PER_DEG = 4;

const SKY = "#2c5f8a";
const GROUND = "#6b4a2b";
const LINE = "#e8e8e8";

/** Paint the artificial horizon.  Size is the square canvas edge in px. */
export function drawAttitude(ctx: CanvasRenderingContext2D, size: number,
                             rpy: EulerDeg): void {
  const half = size / 2;
  const radius = half - 6;
  ctx.clearRect(0, 0, size, size);

  ctx.save();
  ctx.beginPath();
  ctx.arc(half, half, radius, 0, Math.PI * 2);
  ctx.clip();

  // Horizon band, rotated by -roll and shifted by pitch.
  ctx.translate(half, half);
  ctx.rotate((-rpy.roll * Math.PI) / 180);
  const shift = rpy.pitch * PITCH_PX_PER_DEG;
  const span = size * 2;
  ctx.fillStyle = SKY;
  ctx.fillRect(-span, -span + shift, span * 2, span);
  ctx.fillStyle = GROUND;
  ctx.fillRect(-span, shift, span * 2, span);
  ctx.strokeStyle = LINE;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.moveTo(-span, shift);
  ctx.lineTo(span, shift);
  ctx.stroke();

  // Pitch ladder every 10 degrees.
  ctx.font = "10px system-ui, sans-serif";
  ctx.fillStyle = LINE;
  ctx.textAlign = "center";
  ctx.lineWidth = 1;
  for (let deg = -60; deg <= 60; deg += 10) {
    if (deg === 0) continue;
    const y = shift - deg * PITCH_PX_PER_DEG;
    if (Math.abs(y) > radius) continue;
    const width = deg % 20 === 0 ? 34 : 18;
    ctx.beginPath();
    ctx.moveTo(-width / 2, y);
    ctx.lineTo(width / 2, y);
    ctx.stroke();
    if (deg % 20 === 0) ctx.fillText(String(Math.abs(deg)), width / 2 + 14, y + 3);
  }
  ctx.restore();

  // Fixed aircraft reference.
  ctx.strokeStyle = "#ffd24a";
  ctx.lineWidth = 2.5;
  ctx.beginPath();
  ctx.moveTo(half - 36, half);
  ctx.lineTo(half - 10, half);
  ctx.moveTo(half + 10, half);
  ctx.lineTo(half + 36, half);
  ctx.moveTo(half, half - 3);
  ctx.lineTo(half, half + 3);
  ctx.stroke();

  // Roll arc with a pointer at the current angle.
  ctx.strokeStyle = LINE;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  ctx.arc(half, half, radius - 4, (-150 * Math.PI) / 180, (-30 * Math.PI) / 180);
  ctx.stroke();
  const rollRad = ((-90 - rpy.roll) * Math.PI) / 180;
  const px = half + (radius - 4) * Math.cos(rollRad);
  const py = half + (radius - 4) * Math.sin(rollRad);
  ctx.fillStyle = "#ffd24a";
  ctx.beginPath();
  ctx.arc(px, py, 4, 0, Math.PI * 2);
  ctx.fill();

  // Bezel.
  ctx.strokeStyle = "#444";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.arc(half, half, radius, 0, Math.PI * 2);
  ctx.stroke();
}
