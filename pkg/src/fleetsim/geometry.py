"""Frame conventions and attitude math for the simulated fleet.

World frame is north-west-up (NWU): +x north, +y west, +z up.  Body frame
is front-left-up (FLU).  Attitude is expressed as intrinsic Z-Y-X Euler
angles (yaw, then pitch, then roll).  All angles are in radians here;
degrees appear only at the network boundary.

Quaternions use (w, x, y, z) ordering and are kept in the canonical
hemisphere (w >= 0) so that every attitude has exactly one encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Pitch values this close to +/-90 deg are treated as gimbal lock.
GIMBAL_LOCK_MARGIN = 1e-6

_ERR_NOT_FINITE = "non-finite value in %s"
_ERR_NOT_ROTATION = "matrix is not a rotation: %s"
_ERR_GIMBAL_LOCK = "Euler rate transform is singular at pitch %.6f rad"

Vec3 = np.ndarray  # shape (3,) float array
RotationMatrix = np.ndarray  # shape (3, 3) float array


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(_ERR_NOT_FINITE % name)


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    _require_finite("wrap_angle", angle)
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class EulerAngles:
    """Intrinsic Z-Y-X Euler attitude (roll about x, pitch about y, yaw about z)."""

    roll: float
    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        _require_finite("EulerAngles", self.roll, self.pitch, self.yaw)

    def normalized(self) -> "EulerAngles":
        """Canonical form: roll/yaw in [-pi, pi), pitch in [-pi/2, pi/2]."""
        roll, pitch, yaw = self.roll, wrap_angle(self.pitch), self.yaw
        if abs(pitch) > math.pi / 2.0:
            # Reflect through the equivalent attitude on the other seam.
            roll = roll + math.pi
            yaw = yaw + math.pi
            pitch = math.pi - pitch if pitch > 0.0 else -math.pi - pitch
        return EulerAngles(wrap_angle(roll), pitch, wrap_angle(yaw))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.roll, self.pitch, self.yaw)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion (w, x, y, z), canonicalized to w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        _require_finite("Quaternion", self.w, self.x, self.y, self.z)

    def normalized(self) -> "Quaternion":
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n == 0.0:
            raise ValueError("zero-norm quaternion")
        s = 1.0 / n
        q = (self.w * s, self.x * s, self.y * s, self.z * s)
        if q[0] < 0.0:
            q = (-q[0], -q[1], -q[2], -q[3])
        return Quaternion(*q)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


def vec3(x: float, y: float, z: float) -> Vec3:
    """Build a finite 3-vector."""
    _require_finite("vec3", x, y, z)
    return np.array([x, y, z], dtype=float)


def euler_to_rotation(e: EulerAngles) -> RotationMatrix:
    """Rotation matrix mapping body (FLU) coordinates into world (NWU).

    Equals Rz(yaw) @ Ry(pitch) @ Rx(roll).
    """
    cf, sf = math.cos(e.roll), math.sin(e.roll)
    ct, st = math.cos(e.pitch), math.sin(e.pitch)
    cp, sp = math.cos(e.yaw), math.sin(e.yaw)
    return np.array(
        [
            [cp * ct, cp * sf * st - cf * sp, sf * sp + cf * cp * st],
            [ct * sp, cf * cp + sf * sp * st, cf * sp * st - cp * sf],
            [-st, ct * sf, cf * ct],
        ]
    )


def _require_rotation(r: RotationMatrix) -> None:
    if not isinstance(r, np.ndarray) or r.shape != (3, 3):
        raise ValueError(_ERR_NOT_ROTATION % "expected 3x3 array")
    if not np.all(np.isfinite(r)):
        raise ValueError(_ERR_NOT_ROTATION % "non-finite entries")
    if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
        raise ValueError(_ERR_NOT_ROTATION % "not orthonormal")
    if np.linalg.det(r) < 0.0:
        raise ValueError(_ERR_NOT_ROTATION % "determinant is negative")


def rotation_to_euler(r: RotationMatrix) -> tuple[EulerAngles, bool]:
    """Recover Z-Y-X Euler angles from a rotation matrix.

    Returns (angles, locked).  At gimbal lock (|pitch| = pi/2) roll and yaw
    are not separable; roll is set to 0 and yaw absorbs the remaining spin.
    """
    _require_rotation(r)
    st = -r[2, 0]
    st = min(1.0, max(-1.0, st))
    if abs(st) >= 1.0 - GIMBAL_LOCK_MARGIN:
        pitch = math.copysign(math.pi / 2.0, st)
        # r reduces to a pure yaw +/- roll combination: pick roll = 0.
        yaw = math.atan2(-r[0, 1], r[1, 1]) * math.copysign(1.0, st)
        return EulerAngles(0.0, pitch, wrap_angle(yaw)), True
    pitch = math.asin(st)
    roll = math.atan2(r[2, 1], r[2, 2])
    yaw = math.atan2(r[1, 0], r[0, 0])
    return EulerAngles(roll, pitch, yaw), False


def body_to_world_velocity(e: EulerAngles, v_body: Vec3) -> Vec3:
    """Rotate a body-frame velocity into the world frame."""
    return euler_to_rotation(e) @ np.asarray(v_body, dtype=float)


def world_to_body_velocity(e: EulerAngles, v_world: Vec3) -> Vec3:
    """Rotate a world-frame velocity into the body frame."""
    return euler_to_rotation(e).T @ np.asarray(v_world, dtype=float)


def euler_rate_matrix(e: EulerAngles) -> np.ndarray:
    """Transform T(e) mapping body angular rates to Euler angle rates.

    Singular at |pitch| = pi/2; raises ValueError near the singularity.
    """
    if abs(abs(wrap_angle(e.pitch)) - math.pi / 2.0) < GIMBAL_LOCK_MARGIN:
        raise ValueError(_ERR_GIMBAL_LOCK % e.pitch)
    cf, sf = math.cos(e.roll), math.sin(e.roll)
    ct, tt = math.cos(e.pitch), math.tan(e.pitch)
    return np.array(
        [
            [1.0, sf * tt, cf * tt],
            [0.0, cf, -sf],
            [0.0, sf / ct, cf / ct],
        ]
    )


def body_rates_to_euler_rates(e: EulerAngles, omega_body: Vec3) -> Vec3:
    """Euler angle rates produced by body angular rates at attitude e."""
    return euler_rate_matrix(e) @ np.asarray(omega_body, dtype=float)


def euler_rates_to_body_rates(e: EulerAngles, euler_rates: Vec3) -> Vec3:
    """Body angular rates that produce the given Euler angle rates.

    Uses the closed-form inverse of T(e), which is regular everywhere.
    """
    cf, sf = math.cos(e.roll), math.sin(e.roll)
    ct, st = math.cos(e.pitch), math.sin(e.pitch)
    inv = np.array(
        [
            [1.0, 0.0, -st],
            [0.0, cf, sf * ct],
            [0.0, -sf, cf * ct],
        ]
    )
    return inv @ np.asarray(euler_rates, dtype=float)


def gimbal_world_attitude(drone: EulerAngles, gimbal: EulerAngles) -> RotationMatrix:
    """World attitude of a gimbal mounted on a drone: R(drone) @ R(gimbal)."""
    return euler_to_rotation(drone) @ euler_to_rotation(gimbal)


def gimbal_world_position(p_drone: Vec3, drone: EulerAngles, offset_body: Vec3) -> Vec3:
    """World position of the camera given its body-frame mounting offset."""
    return np.asarray(p_drone, dtype=float) + euler_to_rotation(drone) @ np.asarray(
        offset_body, dtype=float
    )


def euler_to_quat(e: EulerAngles) -> Quaternion:
    """Quaternion for the same Z-Y-X rotation, canonical hemisphere."""
    cf, sf = math.cos(e.roll / 2.0), math.sin(e.roll / 2.0)
    ct, st = math.cos(e.pitch / 2.0), math.sin(e.pitch / 2.0)
    cp, sp = math.cos(e.yaw / 2.0), math.sin(e.yaw / 2.0)
    w = cf * ct * cp + sf * st * sp
    x = sf * ct * cp - cf * st * sp
    y = cf * st * cp + sf * ct * sp
    z = cf * ct * sp - sf * st * cp
    return Quaternion(w, x, y, z).normalized()


def quat_to_euler(q: Quaternion) -> EulerAngles:
    """Z-Y-X Euler angles of a unit quaternion (lock handled as in
    rotation_to_euler)."""
    e, _ = rotation_to_euler(quat_to_rotation(q))
    return e


def quat_to_rotation(q: Quaternion) -> RotationMatrix:
    """Rotation matrix of a unit quaternion."""
    q = q.normalized()
    w, x, y, z = q.w, q.x, q.y, q.z
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quat(r: RotationMatrix) -> Quaternion:
    """Quaternion of a rotation matrix (Shepperd's method)."""
    _require_rotation(r)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = (0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s,
             (r[1, 0] - r[0, 1]) / s)
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = ((r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s,
             (r[0, 2] + r[2, 0]) / s)
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = ((r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s,
             (r[1, 2] + r[2, 1]) / s)
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = ((r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
             (r[1, 2] + r[2, 1]) / s, 0.25 * s)
    return Quaternion(*q).normalized()


def quat_multiply(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product a * b (apply b first, then a)."""
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return Quaternion(w, x, y, z).normalized()
