"""Scripted step-response experiments with CSV logging.

Each experiment drives one command channel with a step profile (hold at
+amplitude, optionally hold at -amplitude, then zero) while sampling
telemetry at a fixed row rate.  Rows are written as
``t,cmd,meas,vx,vy,vz,z`` where vx/vy/vz are world-frame velocity and z is
altitude.  The `meas` column is the response on the commanded axis, in the
same sign convention and unit as `cmd`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import yaml

from .client import DroneHandle
from .geometry import (EulerAngles, Quaternion, body_to_world_velocity,
                       quat_to_euler, vec3, wrap_angle)

CSV_HEADER = "t,cmd,meas,vx,vy,vz,z"
ROW_RATE_HZ = 30.0
WARMUP_S = 0.25
TAKEOFF_TIMEOUT_S = 20.0

# Channels and the signal unit each one carries.
CHANNELS = {
    "pitch": "deg",
    "roll": "deg",
    "yaw": "deg/s",
    "vertical": "m/s",
    "gimbal_roll": "deg",
    "gimbal_pitch": "deg",
    "gimbal_yaw": "deg",
}

# Open the envelope before stepping so limits never shape the response.
PREAMBLE_PARAMS = {
    "drone/max_pitch_roll": 40.0,
    "drone/max_vertical_speed": 4.0,
    "drone/max_yaw_rate": 200.0,
    "drone/max_horizontal_speed": 15.0,
    "drone/max_distance": 4000.0,
    "drone/max_altitude": 4000.0,
}

FLIGHT_TOPICS = ("drone/rpy", "drone/speed", "drone/altitude", "drone/state")
GIMBAL_TOPIC = "gimbal/attitude/absolute"


class ExperimentError(Exception):
    """Bad spec file or a run that left controlled flight."""


@dataclass
class ExperimentSpec:
    channel: str
    amplitude: float
    hold: float = 2.0
    reverse: bool = True
    tail: float = 3.0
    rate: float = ROW_RATE_HZ
    name: str = ""

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ExperimentError(
                "unknown channel %r; pick one of %s"
                % (self.channel, ", ".join(sorted(CHANNELS))))
        if self.hold <= 0 or self.tail < 0 or self.rate <= 0:
            raise ExperimentError("hold must be > 0, tail >= 0, rate > 0")
        if not self.name:
            self.name = self.channel

    @property
    def duration(self) -> float:
        phases = 2 if self.reverse else 1
        return self.hold * phases + self.tail

    def command_at(self, t: float) -> float:
        if t < self.hold:
            return self.amplitude
        if self.reverse and t < 2.0 * self.hold:
            return -self.amplitude
        return 0.0


def load_spec(path: str) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ExperimentError("%s: expected a mapping" % path)
    body = raw.get("experiment", raw)
    if not isinstance(body, dict) or "channel" not in body \
            or "amplitude" not in body:
        raise ExperimentError("%s: needs channel and amplitude" % path)
    kwargs = {}
    for key in ("channel", "amplitude", "hold", "reverse", "tail", "rate",
                "name"):
        if key in body:
            kwargs[key] = body[key]
    extra = set(body) - {"channel", "amplitude", "hold", "reverse", "tail",
                         "rate", "name", "drone"}
    if extra:
        raise ExperimentError("%s: unknown keys %s"
                              % (path, ", ".join(sorted(extra))))
    try:
        return ExperimentSpec(**kwargs)
    except TypeError as exc:
        raise ExperimentError("%s: %s" % (path, exc)) from exc


@dataclass
class _Sample:
    """One telemetry snapshot in runner units."""
    roll: float = 0.0  # deg
    pitch: float = 0.0  # deg
    yaw: float = 0.0  # deg
    vx: float = 0.0  # m/s world
    vy: float = 0.0
    vz: float = 0.0
    z: float = 0.0  # m
    state: str = ""
    gimbal: Optional[EulerAngles] = None  # world frame, rad


def _unfold_gimbal(e: EulerAngles) -> EulerAngles:
    """Undo the roll/yaw flip that encodes pitch past +/-90 degrees.

    A camera gimbal keeps its roll stabilized near level, so a decoded
    roll beyond 90 degrees can only mean the pitch crossed a pole and the
    angles landed on the equivalent flipped branch.
    """
    if abs(e.roll) < math.pi / 2:
        return e
    return EulerAngles(
        wrap_angle(e.roll - math.copysign(math.pi, e.roll)),
        math.copysign(math.pi, e.pitch) - e.pitch,
        wrap_angle(e.yaw - math.copysign(math.pi, e.yaw)))


def _snapshot(handle: DroneHandle, want_gimbal: bool) -> _Sample:
    sample = _Sample()
    rpy = handle.latest("drone/rpy")
    speed = handle.latest("drone/speed")
    alt = handle.latest("drone/altitude")
    state = handle.latest("drone/state")
    if rpy is None or speed is None or alt is None or state is None:
        raise ExperimentError("telemetry not flowing; warm-up failed")
    sample.roll = rpy[0]["x"]
    sample.pitch = rpy[0]["y"]
    sample.yaw = rpy[0]["z"]
    euler = EulerAngles(math.radians(sample.roll), math.radians(sample.pitch),
                        math.radians(sample.yaw))
    v_world = body_to_world_velocity(
        euler, vec3(speed[0]["x"], speed[0]["y"], speed[0]["z"]))
    sample.vx = float(v_world[0])
    sample.vy = float(v_world[1])
    sample.vz = float(v_world[2])
    sample.z = alt[0]["data"]
    sample.state = state[0]["data"]
    if want_gimbal:
        quat = handle.latest(GIMBAL_TOPIC)
        if quat is None:
            raise ExperimentError("gimbal telemetry not flowing")
        q = Quaternion(quat[0]["w"], quat[0]["x"], quat[0]["y"], quat[0]["z"])
        sample.gimbal = _unfold_gimbal(quat_to_euler(q))
    return sample


def _measured(spec: ExperimentSpec, sample: _Sample,
              prev: Optional[_Sample]) -> float:
    if spec.channel == "pitch":
        return sample.pitch
    if spec.channel == "roll":
        return sample.roll
    if spec.channel == "vertical":
        return sample.vz
    if spec.channel == "yaw":
        if prev is None:
            return 0.0
        delta = wrap_angle(math.radians(sample.yaw - prev.yaw))
        return math.degrees(delta) * spec.rate
    gim = sample.gimbal
    if gim is None:
        raise ExperimentError("no gimbal sample")
    if spec.channel == "gimbal_roll":
        return math.degrees(gim.roll)
    if spec.channel == "gimbal_pitch":
        # Wire convention: positive gimbal pitch points the camera up.
        return -math.degrees(gim.pitch)
    return math.degrees(gim.yaw)


def _publish_command(handle: DroneHandle, spec: ExperimentSpec,
                     value: float) -> None:
    if spec.channel in ("pitch", "roll", "yaw", "vertical"):
        payload = {"roll": 0.0, "pitch": 0.0, "yaw": 0.0, "gaz": 0.0}
        key = {"pitch": "pitch", "roll": "roll", "yaw": "yaw",
               "vertical": "gaz"}[spec.channel]
        payload[key] = value
        handle.publish("drone/command", payload)
        return
    payload = {"mode": 0, "frame": 1, "roll": 0.0, "pitch": 0.0, "yaw": 0.0}
    axis = spec.channel.split("_", 1)[1]
    payload[axis] = value
    handle.publish("gimbal/command", payload)


def prepare(handle: DroneHandle, spec: ExperimentSpec) -> None:
    """Open limits, take off, and settle into a hover."""
    handle.subscribe("drone/state")
    state = handle.wait_state(("LANDED", "HOVERING", "FLYING"),
                              timeout_s=10.0)
    for name, value in PREAMBLE_PARAMS.items():
        handle.param_set(name, value)
    handle.call("skycontroller/offboard", {"data": True})
    if state == "LANDED":
        reply = handle.call("drone/takeoff")
        if not reply.get("success"):
            raise ExperimentError("takeoff refused: %s"
                                  % reply.get("message"))
        handle.wait_state("HOVERING", timeout_s=TAKEOFF_TIMEOUT_S)
    topics = list(FLIGHT_TOPICS[:-1])  # state already subscribed
    if spec.channel.startswith("gimbal_"):
        topics.append(GIMBAL_TOPIC)
    for topic in topics:
        handle.subscribe(topic)
    # One warm-up window so every topic has published at least once.
    handle.advance(handle.sim_time() + max(WARMUP_S, 1.2 / spec.rate))


def run_experiment(handle: DroneHandle, spec: ExperimentSpec,
                   prepared: bool = False) -> str:
    """Execute one spec; returns the complete CSV text."""
    if not prepared:
        prepare(handle, spec)
    want_gimbal = spec.channel.startswith("gimbal_")
    rows = [CSV_HEADER]
    t0 = handle.sim_time()
    steps = int(round(spec.duration * spec.rate))
    prev: Optional[_Sample] = None
    for k in range(steps + 1):
        t = k / spec.rate
        sample = _snapshot(handle, want_gimbal)
        if sample.state not in ("HOVERING", "FLYING"):
            raise ExperimentError(
                "aborted at t=%.2f s: drone left controlled flight (%s)"
                % (t, sample.state))
        cmd = spec.command_at(t)
        meas = _measured(spec, sample, prev)
        rows.append("%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f"
                    % (t, cmd, meas, sample.vx, sample.vy, sample.vz,
                       sample.z))
        prev = sample
        if k < steps:
            _publish_command(handle, spec, cmd)
            handle.advance(t0 + (k + 1) / spec.rate)
    # Leave the vehicle with a zeroed command so it settles on its own.
    _publish_command(handle, spec, 0.0)
    return "\n".join(rows) + "\n"


# Ready-made specs, one per step-response figure panel.
BUILTIN_SPECS = {
    "pitch-step": ExperimentSpec("pitch", 40.0, name="pitch-step"),
    "roll-step": ExperimentSpec("roll", 40.0, name="roll-step"),
    "vertical-step": ExperimentSpec("vertical", 4.0, name="vertical-step"),
    "yaw-step": ExperimentSpec("yaw", 200.0, name="yaw-step"),
    "gimbal-pitch-step": ExperimentSpec("gimbal_pitch", 45.0, hold=3.0,
                                        tail=0.0, name="gimbal-pitch-step"),
    "gimbal-roll-step": ExperimentSpec("gimbal_roll", 20.0, hold=3.0,
                                       tail=0.0, name="gimbal-roll-step"),
    "gimbal-yaw-step": ExperimentSpec("gimbal_yaw", 45.0, hold=3.0,
                                      tail=0.0, name="gimbal-yaw-step"),
}


def resolve_spec(ref: str) -> ExperimentSpec:
    """A builtin name or a YAML file path."""
    if ref in BUILTIN_SPECS:
        return BUILTIN_SPECS[ref]
    try:
        return load_spec(ref)
    except FileNotFoundError:
        raise ExperimentError(
            "no spec file %r and no such builtin (have: %s)"
            % (ref, ", ".join(sorted(BUILTIN_SPECS)))) from None
