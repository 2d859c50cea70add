"""One simulated drone: flight state machine, directives and sensors.

The vehicle owns a Plant (closed-loop airframe) and layers autopilot
behavior on top: takeoff/landing profiles, braking to a position hold when
manual input stops, trapezoidal relative/absolute moves, return-to-home,
flight plans, a stabilized gimbal, camera/zoom/media bookkeeping, battery
drain and a geofence governor.

Requests are queued by submit() and applied at the next tick boundary;
handlers never mutate state directly.  All request/telemetry payloads use
wire units (degrees, m/s, percent); everything internal is radians and SI.

Sign conventions on the wire follow the right-handed front-left-up body /
north-west-up world frames: piloting roll > 0 rolls right, pitch > 0 flies
forward (nose down), yaw > 0 turns counter-clockwise (left), gaz > 0
climbs.  The one optics-flavored exception: gimbal pitch > 0 points the
camera up, matching its documented range (for the ai model -116..+176 deg).
"""

from __future__ import annotations

import base64
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from . import missions
from .dynamics import (
    CommandLimits,
    ModelParams,
    Plant,
    VirtualCommand,
    clamp_command,
    model_params,
)
from .geometry import (
    EulerAngles,
    euler_to_rotation,
    rotation_to_euler,
    rotation_to_quat,
    wrap_angle,
)
from .params import ParameterError, ParameterStore

EARTH_RADIUS = 6371000.0  # m

TAKEOFF_ALTITUDE = 1.0  # m above the take-off point
TAKEOFF_GAIN = 2.0  # 1/s, vertical P gain during take-off
LANDING_SPEED = 1.0  # m/s
CONNECT_DELAY = 0.25  # s from boot to LANDED
REBOOT_DELAY = 1.0  # s from reboot request to LANDED again
CALIBRATION_DELAY = 2.0  # s of simulated calibration work
COMMAND_STALENESS = 0.5  # s before a piloting/stick stream expires

BRAKE_GAIN = 2.0  # 1/s, deceleration feedback when stopping
HOLD_KP = 2.0  # 1/s^2 position hold stiffness
HOLD_KD = 2.8  # 1/s position hold damping
VEL_GAIN = 2.5  # 1/s velocity tracking gain for trajectories
POS_GAIN = 2.5  # 1/s approach gain near trajectory targets
VZ_GAIN = 2.5  # 1/s altitude tracking gain
YAW_GAIN = 3.0  # 1/s yaw capture gain
TRAJ_ACCEL = 2.0  # m/s^2 horizontal trapezoid acceleration bound
TRAJ_LEAD = 0.6  # s, braking lead to cover attitude tracking lag
TRAJ_VZ_ACCEL = 1.5  # m/s^2 vertical trapezoid acceleration bound
HOVER_SPEED = 0.25  # m/s, below this the brake hands over to position hold
ARRIVE_POS = 0.1  # m, trajectory completion gate
ARRIVE_SPEED = 0.15  # m/s
ARRIVE_YAW = math.radians(2.0)
WAYPOINT_GATE = 0.3  # m, plan waypoint advance gate
FENCE_GAIN = 1.5  # 1/s vertical fence approach gain
FENCE_BRAKE_ACCEL = 5.5  # m/s^2 assumed when predicting horizontal stops

LOW_BATTERY_PERCENT = 10.0
GPS_SATELLITES = 8
LINK_QUALITY = 5

PHOTO_BYTES = 5_000_000
VIDEO_BYTES_PER_SECOND = 3_750_000
BURST_COUNT = 10
BRACKET_COUNT = 3
TIMELAPSE_INTERVAL = 2.0  # s
GPSLAPSE_INTERVAL = 10.0  # m of travel
DEFAULT_STORAGE_BYTES = 16_000_000_000

CAMERA_OFFSET = np.array([0.05, 0.0, -0.02])  # m, camera in the body frame
EXPOSURE_TIME = 1.0 / 60.0
ISO_GAIN = 100
AWB_R_GAIN = 1.4
AWB_B_GAIN = 1.6
GIMBAL_ROLL_RANGE = math.radians(35.0)


class FlightState(str, Enum):
    CONNECTING = "CONNECTING"
    LANDED = "LANDED"
    TAKINGOFF = "TAKINGOFF"
    HOVERING = "HOVERING"
    FLYING = "FLYING"
    LANDING = "LANDING"
    EMERGENCY = "EMERGENCY"
    DISCONNECTED = "DISCONNECTED"


_S = FlightState
LEGAL_TRANSITIONS: frozenset[tuple[FlightState, FlightState]] = frozenset(
    [
        (_S.CONNECTING, _S.LANDED),
        (_S.LANDED, _S.TAKINGOFF),
        (_S.TAKINGOFF, _S.HOVERING),
        (_S.TAKINGOFF, _S.LANDING),
        (_S.HOVERING, _S.FLYING),
        (_S.FLYING, _S.HOVERING),
        (_S.HOVERING, _S.LANDING),
        (_S.FLYING, _S.LANDING),
        (_S.LANDING, _S.LANDED),
        # reboot path
        (_S.DISCONNECTED, _S.CONNECTING),
    ]
    + [(s, _S.EMERGENCY) for s in _S]
    + [(s, _S.DISCONNECTED) for s in _S]
)

AIRBORNE_STATES = frozenset(
    [_S.TAKINGOFF, _S.HOVERING, _S.FLYING, _S.LANDING]
)


def geo_to_local(lat: float, lon: float, anchor_lat: float,
                 anchor_lon: float) -> tuple[float, float]:
    """Equirectangular projection to local NWU north/west meters."""
    north = math.radians(lat - anchor_lat) * EARTH_RADIUS
    west = -math.radians(lon - anchor_lon) * EARTH_RADIUS * math.cos(
        math.radians(anchor_lat)
    )
    return north, west


def local_to_geo(north: float, west: float, anchor_lat: float,
                 anchor_lon: float) -> tuple[float, float]:
    lat = anchor_lat + math.degrees(north / EARTH_RADIUS)
    lon = anchor_lon - math.degrees(
        west / (EARTH_RADIUS * math.cos(math.radians(anchor_lat)))
    )
    return lat, lon


@dataclass
class Request:
    kind: str  # 'service' | 'command' | 'param_set' | 'param_get'
    channel: str
    payload: dict
    token: Any = None


@dataclass
class Event:
    kind: str  # 'reply' | 'param' | 'warning' | 'media'
    token: Any = None
    payload: Optional[dict] = None
    channel: str = ""
    message: str = ""


def _ok(message: str = "ok", **extra) -> dict:
    out = {"success": True, "message": message}
    out.update(extra)
    return out


def _fail(message: str, **extra) -> dict:
    out = {"success": False, "message": message}
    out.update(extra)
    return out


@dataclass
class VehicleConfig:
    name: str
    model: str
    dt: float = 0.005
    latitude: float = 48.0
    longitude: float = 11.0
    altitude: float = 0.0
    yaw: float = 0.0
    ground_station: Optional[tuple[float, float]] = None
    require_arm: bool = False
    storage_bytes: int = DEFAULT_STORAGE_BYTES
    link_droop_m: Optional[float] = None  # quality falls off with distance
    version: str = "0.1.0"


@dataclass
class MediaRecord:
    media_id: str
    kind: str  # 'photo' | 'video'
    size: int  # bytes
    stamp: int  # sim ns

    def placeholder_bytes(self) -> bytes:
        seed = self.media_id.encode("utf-8")
        block = (seed + b"\x00" * (-len(seed) % 16)) * 64
        reps = self.size // len(block) + 1
        return (block * reps)[: self.size]


class _Gimbal:
    """Two- or three-axis stabilized mount with per-axis slew and lag.

    Attitude is stored as body-relative FLU Euler angles; the wire's
    up-positive pitch is negated at ingestion and presentation.
    """

    def __init__(self, model: ModelParams):
        self.model = model
        self.roll = 0.0
        self.pitch = 0.0  # FLU: positive = camera down
        self.yaw = 0.0
        self.mode = 0  # 0 position, 1 velocity
        self.frame = 1  # 1 relative, 2 absolute
        self.target = (0.0, 0.0, 0.0)  # per-frame interpretation
        self.rates = (0.0, 0.0, 0.0)
        # FLU pitch range is the negated wire range, swapped ends.
        lo, hi = model.gimbal_pitch_range
        self.pitch_range = (-hi, -lo)
        self.yaw_range = math.pi if model.name == "ai" else 0.0

    def command_position(self, frame: int, roll: float, pitch: float,
                         yaw: float) -> bool:
        """Set a position target (radians, wire signs).  Returns True if any
        axis had to be clamped."""
        tgt_roll = roll
        tgt_pitch = -pitch
        tgt_yaw = yaw
        clamped = False
        if abs(tgt_roll) > GIMBAL_ROLL_RANGE:
            tgt_roll = math.copysign(GIMBAL_ROLL_RANGE, tgt_roll)
            clamped = True
        lo, hi = self.pitch_range
        if not lo <= tgt_pitch <= hi:
            tgt_pitch = min(hi, max(lo, tgt_pitch))
            clamped = True
        if abs(tgt_yaw) > self.yaw_range:
            tgt_yaw = math.copysign(self.yaw_range, tgt_yaw) if self.yaw_range else 0.0
            clamped = True
        self.mode = 0
        self.frame = 1 if frame == 0 else frame
        self.target = (tgt_roll, tgt_pitch, tgt_yaw)
        return clamped

    def command_velocity(self, roll_rate: float, pitch_rate: float,
                         yaw_rate: float) -> None:
        self.mode = 1
        self.rates = (roll_rate, -pitch_rate,
                      yaw_rate if self.yaw_range else 0.0)

    def reset(self) -> None:
        self.mode = 0
        self.frame = 1
        self.target = (0.0, 0.0, 0.0)

    def tick(self, dt: float, drone_att: EulerAngles, max_rate: float) -> None:
        if self.mode == 1:
            lim = max_rate
            r = self.roll + max(-lim, min(lim, self.rates[0])) * dt
            p = self.pitch + max(-lim, min(lim, self.rates[1])) * dt
            y = self.yaw + max(-lim, min(lim, self.rates[2])) * dt
            self._store(r, p, y)
            return
        tgt = self.target
        if self.frame == 2:
            # Absolute target: solve the body-relative attitude that yields
            # the commanded world attitude at the current drone attitude.
            want = euler_to_rotation(EulerAngles(*tgt))
            rel = euler_to_rotation(drone_att).T @ want
            e, _ = rotation_to_euler(rel)
            tgt = (e.roll, e.pitch, e.yaw)
        tau = self.model.gimbal_time_constant
        alpha = dt / tau
        step_cap = max_rate * dt

        def track(cur, want):
            d = alpha * (want - cur)
            return cur + max(-step_cap, min(step_cap, d))

        self._store(
            track(self.roll, tgt[0]),
            track(self.pitch, tgt[1]),
            track(self.yaw, tgt[2] if self.yaw_range else 0.0),
        )

    def _store(self, roll: float, pitch: float, yaw: float) -> None:
        lo, hi = self.pitch_range
        self.roll = max(-GIMBAL_ROLL_RANGE, min(GIMBAL_ROLL_RANGE, roll))
        self.pitch = max(lo, min(hi, pitch))
        self.yaw = max(-self.yaw_range, min(self.yaw_range, yaw))

    def attitude(self) -> EulerAngles:
        return EulerAngles(self.roll, self.pitch, self.yaw)


class _Camera:
    """Zoom, capture modes and the synthetic video stream."""

    def __init__(self, model: ModelParams):
        self.model = model
        self.zoom = 1.0
        self.zoom_target = 1.0
        self.zoom_rate = 0.0  # used in velocity mode
        self.zoom_velocity_mode = False
        self.recording: Optional[dict] = None  # {'media_id', 'started'}
        self.series: Optional[dict] = None  # time/GPS lapse state
        self.frame_counter = 0
        self._pattern_cache: Optional[tuple[bytes, str]] = None

    def command(self, mode: int, zoom: float, max_speed: float) -> None:
        if mode == 0:
            self.zoom_velocity_mode = False
            self.zoom_target = max(1.0, min(self.model.max_zoom, zoom))
        else:
            self.zoom_velocity_mode = True
            self.zoom_rate = max(-max_speed, min(max_speed, zoom))

    def reset_zoom(self) -> None:
        self.zoom_velocity_mode = False
        self.zoom_target = 1.0

    def tick(self, dt: float, max_speed: float) -> None:
        if self.zoom_velocity_mode:
            self.zoom += max(-max_speed, min(max_speed, self.zoom_rate)) * dt
        else:
            delta = self.zoom_target - self.zoom
            step = max_speed * dt
            self.zoom += max(-step, min(step, delta))
        self.zoom = max(1.0, min(self.model.max_zoom, self.zoom))

    def hfov(self) -> float:
        """Effective horizontal field of view at the current zoom, radians."""
        return 2.0 * math.atan(math.tan(self.model.video_hfov / 2.0) / self.zoom)

    def vfov(self) -> float:
        half = math.tan(self.hfov() / 2.0)
        return 2.0 * math.atan(half * self.model.stream_height /
                               self.model.stream_width)

    def frame_payload(self, stamp: int) -> dict:
        w, h = self.model.stream_width, self.model.stream_height
        if self._pattern_cache is None:
            row = np.arange(w, dtype=np.uint32)
            grad = np.empty((h, w, 3), dtype=np.uint8)
            grad[:, :, 0] = (row * 255 // max(1, w - 1)).astype(np.uint8)
            grad[:, :, 1] = (
                np.arange(h, dtype=np.uint32)[:, None] * 255 // max(1, h - 1)
            ).astype(np.uint8)
            grad[:, :, 2] = 128
            body = grad.tobytes()
            # First row is rewritten per frame; rows are 3-byte aligned so
            # the remainder's base64 encoding can be cached.
            tail_b64 = base64.b64encode(body[w * 3:]).decode("ascii")
            self._pattern_cache = (body[: w * 3], tail_b64)
        head, tail_b64 = self._pattern_cache
        counter = self.frame_counter
        self.frame_counter += 1
        stamped = bytearray(head)
        stamped[:8] = counter.to_bytes(8, "big")
        data = base64.b64encode(bytes(stamped)).decode("ascii") + tail_b64
        return {
            "stamp": stamp,
            "width": w,
            "height": h,
            "encoding": "rgb8",
            "frame": counter,
            "data": data,
        }


class _Battery:
    def __init__(self, model: ModelParams):
        self.model = model
        self.percentage = 100.0
        self.health = 100

    def drain(self, dt: float) -> None:
        self.percentage = max(
            0.0, self.percentage - dt * 100.0 / self.model.max_flight_time
        )

    def voltage(self) -> float:
        # Linear discharge curve kept within [3.3, 4.2] V per cell.
        return self.model.battery_cells * (3.3 + 0.9 * self.percentage / 100.0)


class _Storage:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.media: list[MediaRecord] = []
        self._counter = 0

    def used(self) -> int:
        return sum(m.size for m in self.media)

    def available(self, pending: int = 0) -> int:
        return max(0, self.capacity - self.used() - pending)

    def next_id(self, name: str, kind: str) -> str:
        self._counter += 1
        return "%s_%s_%06d" % (name, kind, self._counter)

    def add(self, record: MediaRecord) -> None:
        self.media.append(record)

    def format(self) -> int:
        n = len(self.media)
        self.media = []
        return n


@dataclass
class _Directive:
    kind: str  # 'manual' | 'moveby' | 'moveto' | 'rth' | 'plan'


@dataclass
class _Manual(_Directive):
    command: VirtualCommand = field(default_factory=VirtualCommand)
    received: float = 0.0

    def __init__(self, command, received):
        super().__init__("manual")
        self.command = command
        self.received = received


class _Move(_Directive):
    """Shared tracker for moveby/moveto style point-to-point legs."""

    def __init__(self, kind: str, target: np.ndarray, target_yaw: Optional[float],
                 yaw_mode: str = "during"):
        super().__init__(kind)
        self.target = target
        self.target_yaw = target_yaw  # None keeps the current heading
        self.yaw_mode = yaw_mode  # 'during' | 'first' | 'track'
        self.turn_done = yaw_mode != "first"


class _Rth(_Directive):
    def __init__(self, home_xy: np.ndarray, home_z: float, climb_z: float,
                 land: bool):
        super().__init__("rth")
        self.home_xy = home_xy
        self.home_z = home_z
        self.climb_z = climb_z
        self.land = land
        self.phase = "climb"  # -> 'cruise' -> 'arrive'


class _PlanRun(_Directive):
    def __init__(self, uid: str, waypoints, index: int = 0):
        super().__init__("plan")
        self.uid = uid
        self.waypoints = waypoints
        self.index = index
        self.pending_takeoff = False


class Vehicle:
    """Deterministic single-drone simulation core."""

    def __init__(self, config: VehicleConfig):
        self.config = config
        self.name = config.name
        self.model = model_params(config.model)
        self.params = ParameterStore(config.model)
        self.plant = Plant(self.model, config.dt,
                           position=(0.0, 0.0, max(0.0, config.altitude)),
                           yaw=config.yaw)
        self.dt = config.dt
        self.ticks = 0
        self.state = FlightState.CONNECTING
        self.armed = False
        self.offboard = False
        self.gimbal = _Gimbal(self.model)
        self.camera = _Camera(self.model)
        self.battery = _Battery(self.model)
        self.storage = _Storage(config.storage_bytes)
        self.anchor = (config.latitude, config.longitude)
        self._requests: deque[Request] = deque()
        self._events: list[Event] = []
        self.directive: Optional[_Directive] = None
        self._hold_point: Optional[np.ndarray] = None
        self._hold_yaw = config.yaw
        self._sticks: Optional[dict] = None
        self._sticks_received = -math.inf
        self._sticks_prev_buttons = {"takeoff_land": False, "return_home": False,
                                     "reset_camera": False, "reset_zoom": False}
        self._stick_cam_active = False
        self._stick_zoom_active = False
        self._takeoff_base = 0.0
        self._takeoff_point: Optional[np.ndarray] = None
        self._custom_home: Optional[np.ndarray] = None
        self._plans: dict[str, list[missions.Waypoint]] = {}
        self._paused_plan: Optional[_PlanRun] = None
        self._low_battery_latched = False
        self._poi: Optional[dict] = None
        self._pending_ops: list[tuple[float, str, Any]] = []  # (due, op, token)
        self._boot_at = 0.0
        self._transitions: list[tuple[FlightState, FlightState]] = []
        ground = config.ground_station
        self._pilot_xy: Optional[np.ndarray] = None
        if ground is not None:
            self._pilot_xy = np.array(
                geo_to_local(ground[0], ground[1], *self.anchor)
            )

    # ------------------------------------------------------------------
    # bookkeeping

    @property
    def sim_time(self) -> float:
        return self.ticks * self.dt

    def stamp_ns(self) -> int:
        return self.ticks * int(self.dt * 1e9)

    def _transition(self, to: FlightState) -> None:
        if to == self.state:
            return
        if (self.state, to) not in LEGAL_TRANSITIONS:
            raise RuntimeError(
                "illegal flight state transition %s -> %s" % (self.state, to)
            )
        self._transitions.append((self.state, to))
        self.state = to

    def transitions(self) -> list[tuple[FlightState, FlightState]]:
        return list(self._transitions)

    def submit(self, request: Request) -> None:
        self._requests.append(request)

    def pump(self) -> list[Event]:
        """Process queued requests now, without advancing simulated time.

        Lets a host answer services while the clock is stopped; tick()
        performs the same drain when time is moving.
        """
        self._drain_requests()
        events = self._events
        self._events = []
        return events

    def _emit(self, event: Event) -> None:
        self._events.append(event)

    def _reply(self, token, payload: dict) -> None:
        # Autonomous actions (stick buttons, battery failsafe) have no
        # requester; their feedback travels via telemetry or warnings.
        if token is None:
            return
        self._emit(Event("reply", token=token, payload=payload))

    def _warn(self, token, channel: str, message: str) -> None:
        self._emit(Event("warning", token=token, channel=channel,
                         message=message))

    # ------------------------------------------------------------------
    # geometry helpers

    def position(self) -> np.ndarray:
        return self.plant.state.position

    def velocity(self) -> np.ndarray:
        return self.plant.state.velocity

    def attitude(self) -> EulerAngles:
        return self.plant.state.attitude

    def geo_position(self) -> tuple[float, float, float]:
        p = self.position()
        lat, lon = local_to_geo(p[0], p[1], *self.anchor)
        return lat, lon, p[2]

    def _limits(self) -> CommandLimits:
        return CommandLimits(
            max_tilt=math.radians(self.params.get("drone/max_pitch_roll")),
            max_vertical_speed=self.params.get("drone/max_vertical_speed"),
            max_yaw_rate=math.radians(self.params.get("drone/max_yaw_rate")),
        )

    def _accel_to_tilt(self, ax: float, ay: float) -> tuple[float, float]:
        """World-frame horizontal acceleration to (roll, pitch) commands."""
        yaw = self.attitude().yaw
        cp, sp = math.cos(yaw), math.sin(yaw)
        abx = ax * cp + ay * sp
        aby = -ax * sp + ay * cp
        from .dynamics import G

        return -math.atan2(aby, G), math.atan2(abx, G)

    def _home_anchor_xy(self) -> np.ndarray:
        if self._takeoff_point is not None:
            return self._takeoff_point[:2]
        return np.zeros(2)

    def _resolve_home(self) -> Optional[tuple[np.ndarray, str]]:
        """Current home point per home/type, or None when unavailable."""
        home_type = self.params.get("home/type")
        if home_type == 1:
            if self._takeoff_point is None:
                return None
            return self._takeoff_point[:2].copy(), "takeoff"
        if home_type == 3:
            if self._custom_home is None:
                return None
            return self._custom_home[:2].copy(), "custom"
        if self._pilot_xy is None:
            return None
        return self._pilot_xy.copy(), "pilot"

    # ------------------------------------------------------------------
    # request handling (applied at tick boundaries)

    def _drain_requests(self) -> None:
        while self._requests:
            req = self._requests.popleft()
            try:
                if req.kind == "service":
                    self._handle_service(req)
                elif req.kind == "command":
                    self._handle_command(req)
                elif req.kind == "param_set":
                    self._handle_param_set(req)
                elif req.kind == "param_get":
                    value = self.params.get(req.channel)
                    self._emit(Event("param", token=req.token,
                                     channel=req.channel,
                                     payload={"value": value}))
                else:
                    self._warn(req.token, req.channel,
                               "unknown request kind %r" % req.kind)
            except ParameterError as exc:
                self._warn(req.token, req.channel, str(exc))

    def _handle_param_set(self, req: Request) -> None:
        value = req.payload.get("value")
        stored = self.params.set(req.channel, value)
        self._emit(Event("param", token=req.token, channel=req.channel,
                         payload={"value": stored}))

    def _handle_service(self, req: Request) -> None:
        handler = _SERVICE_HANDLERS.get(req.channel)
        if handler is None:
            self._warn(req.token, req.channel,
                       "unknown service %r" % req.channel)
            return
        handler(self, req)

    def _handle_command(self, req: Request) -> None:
        handler = _COMMAND_HANDLERS.get(req.channel)
        if handler is None:
            self._warn(req.token, req.channel, "unknown topic %r" % req.channel)
            return
        handler(self, req)

    # --- services ------------------------------------------------------

    def _svc_takeoff(self, req: Request) -> None:
        if self.state != FlightState.LANDED:
            self._reply(req.token, _fail("takeoff requires LANDED, state is %s"
                                         % self.state.value))
            return
        if self.config.require_arm and not self.armed:
            self._reply(req.token, _fail("not armed"))
            return
        self._begin_takeoff()
        self._reply(req.token, _ok("taking off"))

    def _begin_takeoff(self) -> None:
        self._takeoff_base = self.position()[2]
        self._takeoff_point = self.position().copy()
        self._low_battery_latched = False
        self.directive = None
        self._transition(FlightState.TAKINGOFF)
        if self.params.get("camera/autorecord") and self.camera.recording is None:
            self._start_recording()

    def _svc_land(self, req: Request) -> None:
        if self.state not in (FlightState.TAKINGOFF, FlightState.HOVERING,
                              FlightState.FLYING, FlightState.LANDING):
            self._reply(req.token, _fail("land requires an airborne state, "
                                         "state is %s" % self.state.value))
            return
        self._begin_landing()
        self._reply(req.token, _ok("landing"))

    def _begin_landing(self) -> None:
        self.directive = None
        self._paused_plan = None
        if self.state != FlightState.LANDING:
            self._transition(FlightState.LANDING)

    def _svc_emergency(self, req: Request) -> None:
        self.directive = None
        self._paused_plan = None
        self._transition(FlightState.EMERGENCY)
        self._reply(req.token, _ok("motors cut"))

    def _svc_halt(self, req: Request) -> None:
        if self.state not in (FlightState.HOVERING, FlightState.FLYING,
                              FlightState.TAKINGOFF):
            self._reply(req.token, _fail("halt requires an airborne state, "
                                         "state is %s" % self.state.value))
            return
        self.directive = None
        self._paused_plan = None
        self._hold_point = None
        if self.state == FlightState.TAKINGOFF:
            self._finish_takeoff()
        self._reply(req.token, _ok("halting"))

    def _svc_reboot(self, req: Request) -> None:
        if self.state not in (FlightState.LANDED, FlightState.EMERGENCY,
                              FlightState.CONNECTING):
            self._reply(req.token, _fail("reboot requires the drone on the "
                                         "ground, state is %s" % self.state.value))
            return
        self._reply(req.token, _ok("rebooting"))
        self._transition(FlightState.DISCONNECTED)
        self.params.reset()
        self.armed = False
        self.offboard = False
        self.directive = None
        self._paused_plan = None
        self._poi = None
        self.gimbal = _Gimbal(self.model)
        self.camera = _Camera(self.model)
        self.plant.rest_on_ground()
        self._pending_ops.append((self.sim_time + REBOOT_DELAY, "boot", None))

    def _svc_calibrate(self, req: Request) -> None:
        if self.state not in (FlightState.LANDED, FlightState.CONNECTING):
            self._reply(req.token, _fail("calibration requires the drone on "
                                         "the ground, state is %s"
                                         % self.state.value))
            return
        self._pending_ops.append(
            (self.sim_time + CALIBRATION_DELAY, "calibrated", req.token)
        )

    def _svc_arm(self, req: Request) -> None:
        want = bool(req.payload.get("data"))
        if self.state != FlightState.LANDED:
            self._reply(req.token, _fail("arming requires LANDED, state is %s"
                                         % self.state.value))
            return
        self.armed = want
        self._reply(req.token, _ok("armed" if want else "disarmed"))

    def _svc_offboard(self, req: Request) -> None:
        self.offboard = bool(req.payload.get("data"))
        self._reply(req.token, _ok("offboard" if self.offboard else "manual"))

    def _svc_rth(self, req: Request) -> None:
        self._start_rth(req.token)

    def _svc_navigate(self, req: Request) -> None:
        if bool(req.payload.get("data")):
            self._start_rth(req.token)
            return
        if isinstance(self.directive, _Rth):
            self.directive = None
            self._reply(req.token, _ok("return to home stopped"))
        else:
            self._reply(req.token, _ok("no return to home in progress"))

    def _start_rth(self, token) -> None:
        if self.state not in (FlightState.HOVERING, FlightState.FLYING):
            self._reply(token, _fail("return home requires HOVERING or "
                                     "FLYING, state is %s" % self.state.value))
            return
        home = self._resolve_home()
        if home is None:
            self._reply(token, _fail("no home fix available"))
            return
        home_xy, source = home
        min_alt = self.params.get("home/min_altitude")
        max_alt = self.params.get("drone/max_altitude")
        climb_z = min(max(self.position()[2], min_alt), max_alt)
        land = self.params.get("home/ending_behavior") == 0
        self.directive = _Rth(home_xy, 0.0, climb_z, land)
        self._paused_plan = None
        self._reply(token, _ok("returning to %s home" % source))

    def _svc_home_set(self, req: Request) -> None:
        north, west = geo_to_local(req.payload["latitude"],
                                   req.payload["longitude"], *self.anchor)
        self._custom_home = np.array([north, west,
                                      float(req.payload["altitude"])])
        self._reply(req.token, _ok("custom home set"))

    def _svc_poi(self, req: Request) -> None:
        north, west = geo_to_local(req.payload["latitude"],
                                   req.payload["longitude"], *self.anchor)
        if bool(req.payload["locked_gimbal"]):
            self._poi = {
                "point": np.array([north, west, float(req.payload["altitude"])]),
            }
            self._reply(req.token, _ok("gimbal locked on point"))
        else:
            self._poi = None
            self._reply(req.token, _ok("gimbal unlocked"))

    def _svc_plan_upload(self, req: Request) -> None:
        uid = req.payload["uid"]
        try:
            waypoints = missions.parse_plan(req.payload["file"])
        except missions.PlanError as exc:
            self._reply(req.token, _fail(str(exc), uid=uid))
            return
        self._plans[uid] = waypoints
        self._reply(req.token, _ok("plan stored (%d waypoints)"
                                   % len(waypoints), uid=uid))

    def _svc_plan_start(self, req: Request) -> None:
        uid = req.payload["uid"]
        paused = self._paused_plan
        if paused is not None and paused.uid == uid:
            self._paused_plan = None
            self.directive = paused
            self._reply(req.token, _ok("plan resumed at waypoint %d"
                                       % paused.index, uid=uid))
            return
        if uid not in self._plans:
            self._reply(req.token, _fail("unknown plan %r" % uid, uid=uid))
            return
        if self.state not in (FlightState.LANDED, FlightState.HOVERING,
                              FlightState.FLYING):
            self._reply(req.token, _fail("plan start requires LANDED, "
                                         "HOVERING or FLYING, state is %s"
                                         % self.state.value, uid=uid))
            return
        run = _PlanRun(uid, self._plans[uid])
        self._paused_plan = None
        if self.state == FlightState.LANDED:
            if self.config.require_arm and not self.armed:
                self._reply(req.token, _fail("not armed", uid=uid))
                return
            run.pending_takeoff = True
            self._begin_takeoff()
        self.directive = run
        self._reply(req.token, _ok("plan started", uid=uid))

    def _svc_plan_pause(self, req: Request) -> None:
        if not isinstance(self.directive, _PlanRun):
            self._reply(req.token, _fail("no plan running"))
            return
        self._paused_plan = self.directive
        self.directive = None
        self._reply(req.token, _ok("plan paused at waypoint %d"
                                   % self._paused_plan.index))

    def _svc_plan_stop(self, req: Request) -> None:
        if isinstance(self.directive, _PlanRun):
            self.directive = None
            self._paused_plan = None
            self._reply(req.token, _ok("plan stopped"))
            return
        if self._paused_plan is not None:
            self._paused_plan = None
            self._reply(req.token, _ok("paused plan discarded"))
            return
        self._reply(req.token, _fail("no plan running"))

    def _svc_gimbal_calibrate(self, req: Request) -> None:
        self._svc_calibrate(req)

    def _svc_gimbal_reset(self, req: Request) -> None:
        self.gimbal.reset()
        self._poi = None
        self._reply(req.token, _ok("gimbal reset"))

    def _svc_camera_reset(self, req: Request) -> None:
        self.camera.reset_zoom()
        self._reply(req.token, _ok("zoom reset"))

    def _svc_photo_take(self, req: Request) -> None:
        if self.params.get("camera/mode") != 1:
            self._reply(req.token, _fail("camera is in recording mode"))
            return
        mode = req.payload["mode"]
        if mode in (3, 4):
            if self.camera.series is not None:
                self._reply(req.token, _fail("capture series already running"))
                return
            media_id = self._capture_photo()
            if media_id is None:
                self._reply(req.token, _fail("storage full"))
                return
            self.camera.series = {
                "mode": mode,
                "next_time": self.sim_time + TIMELAPSE_INTERVAL,
                "last_pos": self.position()[:2].copy(),
            }
            self._reply(req.token, _ok("capture series started",
                                       media_id=media_id))
            return
        count = {0: 1, 1: BRACKET_COUNT, 2: BURST_COUNT}[mode]
        last_id = None
        for _ in range(count):
            media_id = self._capture_photo()
            if media_id is None:
                self._reply(req.token, _fail("storage full"))
                return
            last_id = media_id
        self._reply(req.token, _ok("captured %d photo(s)" % count,
                                   media_id=last_id))

    def _svc_photo_stop(self, req: Request) -> None:
        if self.camera.series is None:
            self._reply(req.token, _fail("no capture series running"))
            return
        self.camera.series = None
        self._reply(req.token, _ok("capture series stopped"))

    def _capture_photo(self) -> Optional[str]:
        if self.storage.available() < PHOTO_BYTES:
            return None
        media_id = self.storage.next_id(self.name, "photo")
        self.storage.add(MediaRecord(media_id, "photo", PHOTO_BYTES,
                                     self.stamp_ns()))
        return media_id

    def _svc_recording_start(self, req: Request) -> None:
        if self.params.get("camera/mode") != 0:
            self._reply(req.token, _fail("camera is in photo mode"))
            return
        if self.camera.recording is not None:
            self._reply(req.token, _fail("already recording"))
            return
        media_id = self._start_recording()
        if media_id is None:
            self._reply(req.token, _fail("storage full"))
            return
        self._reply(req.token, _ok("recording", media_id=media_id))

    def _start_recording(self) -> Optional[str]:
        if self.storage.available() <= 0:
            return None
        media_id = self.storage.next_id(self.name, "video")
        self.camera.recording = {"media_id": media_id, "started": self.sim_time}
        return media_id

    def _svc_recording_stop(self, req: Request) -> None:
        rec = self.camera.recording
        if rec is None:
            self._reply(req.token, _fail("not recording"))
            return
        media_id = self._finalize_recording()
        self._reply(req.token, _ok("recording stopped", media_id=media_id))

    def _finalize_recording(self) -> str:
        rec = self.camera.recording
        duration = max(self.dt, self.sim_time - rec["started"])
        size = min(int(duration * VIDEO_BYTES_PER_SECOND),
                   self.storage.available())
        self.storage.add(MediaRecord(rec["media_id"], "video", size,
                                     self.stamp_ns()))
        self.camera.recording = None
        return rec["media_id"]

    def _svc_storage_download(self, req: Request) -> None:
        delete = bool(req.payload.get("data"))
        records = list(self.storage.media)
        for record in records:
            data = base64.b64encode(record.placeholder_bytes()).decode("ascii")
            self._emit(Event("media", token=req.token, payload={
                "stamp": self.stamp_ns(),
                "media_id": record.media_id,
                "kind": record.kind,
                "size": record.size,
                "data": data,
            }))
        if delete:
            self.storage.media = []
        self._reply(req.token, _ok("%d media" % len(records)))

    def _svc_storage_format(self, req: Request) -> None:
        if self.camera.recording is not None:
            self._reply(req.token, _fail("recording in progress"))
            return
        n = self.storage.format()
        self._reply(req.token, _ok("removed %d media" % n))

    # --- command topics --------------------------------------------------

    def _cmd_piloting(self, req: Request) -> None:
        if self.state not in (FlightState.HOVERING, FlightState.FLYING):
            self._warn(req.token, req.channel,
                       "piloting command ignored, state is %s" % self.state.value)
            return
        if not self.offboard:
            self._warn(req.token, req.channel,
                       "piloting command ignored, offboard is off")
            return
        if self.directive is not None and not isinstance(self.directive, _Manual):
            self._warn(req.token, req.channel,
                       "piloting command ignored, %s directive active"
                       % self.directive.kind)
            return
        cmd = VirtualCommand(
            vz=float(req.payload["gaz"]),
            roll=math.radians(float(req.payload["roll"])),
            pitch=math.radians(float(req.payload["pitch"])),
            yaw_rate=math.radians(float(req.payload["yaw"])),
        )
        self.directive = _Manual(cmd, self.sim_time)

    def _cmd_moveby(self, req: Request) -> None:
        if self.state not in (FlightState.HOVERING, FlightState.FLYING):
            self._warn(req.token, req.channel,
                       "moveby ignored, state is %s" % self.state.value)
            return
        if self.directive is not None and not isinstance(self.directive, _Manual):
            self._warn(req.token, req.channel,
                       "moveby ignored, %s directive active" % self.directive.kind)
            return
        yaw = self.attitude().yaw
        cp, sp = math.cos(yaw), math.sin(yaw)
        dx, dy = float(req.payload["dx"]), float(req.payload["dy"])
        disp = np.array([dx * cp - dy * sp, dx * sp + dy * cp,
                         float(req.payload["dz"])])
        target = self.position() + disp
        target_yaw = wrap_angle(yaw + math.radians(float(req.payload["dyaw"])))
        target = self._fence_clamp_target(target, req.token, req.channel)
        self.directive = _Move("moveby", target, target_yaw)

    def _cmd_moveto(self, req: Request) -> None:
        if self.state not in (FlightState.HOVERING, FlightState.FLYING):
            self._warn(req.token, req.channel,
                       "moveto ignored, state is %s" % self.state.value)
            return
        if self.directive is not None and not isinstance(self.directive, _Manual):
            self._warn(req.token, req.channel,
                       "moveto ignored, %s directive active" % self.directive.kind)
            return
        north, west = geo_to_local(float(req.payload["latitude"]),
                                   float(req.payload["longitude"]),
                                   *self.anchor)
        target = np.array([north, west, float(req.payload["altitude"])])
        target = self._fence_clamp_target(target, req.token, req.channel)
        mode = req.payload["orientation_mode"]
        heading = math.radians(float(req.payload["heading"]))
        if mode == 0:
            directive = _Move("moveto", target, None)
        elif mode == 1:
            directive = _Move("moveto", target, None, yaw_mode="track")
        elif mode == 2:
            directive = _Move("moveto", target, heading, yaw_mode="first")
        else:
            directive = _Move("moveto", target, heading)
        self.directive = directive

    def _cmd_gimbal(self, req: Request) -> None:
        mode = req.payload["mode"]
        roll = math.radians(float(req.payload["roll"]))
        pitch = math.radians(float(req.payload["pitch"]))
        yaw = math.radians(float(req.payload["yaw"]))
        if self._poi is not None:
            self._warn(req.token, req.channel,
                       "gimbal command ignored, locked on point of interest")
            return
        if mode == 0:
            clamped = self.gimbal.command_position(req.payload["frame"],
                                                   roll, pitch, yaw)
            if clamped:
                self._warn(req.token, req.channel,
                           "gimbal target clamped to mechanical range")
        else:
            self.gimbal.command_velocity(roll, pitch, yaw)

    def _cmd_camera(self, req: Request) -> None:
        self.camera.command(req.payload["mode"], float(req.payload["zoom"]),
                            self.params.get("camera/max_zoom_speed"))

    def _cmd_sticks(self, req: Request) -> None:
        payload = req.payload
        self._sticks = payload
        self._sticks_received = self.sim_time
        for button, action in (
            ("takeoff_land", self._stick_takeoff_land),
            ("return_home", self._stick_return_home),
            ("reset_camera", lambda: self.gimbal.reset()),
            ("reset_zoom", lambda: self.camera.reset_zoom()),
        ):
            now = bool(payload.get(button))
            if now and not self._sticks_prev_buttons[button]:
                action()
            self._sticks_prev_buttons[button] = now

    def _stick_takeoff_land(self) -> None:
        if self.state == FlightState.LANDED:
            if not (self.config.require_arm and not self.armed):
                self._begin_takeoff()
        elif self.state in (FlightState.TAKINGOFF, FlightState.HOVERING,
                            FlightState.FLYING):
            self._begin_landing()

    def _stick_return_home(self) -> None:
        self._start_rth(None)

    # ------------------------------------------------------------------
    # per-tick guidance

    def _hold_command(self) -> VirtualCommand:
        if self._hold_point is None:
            self._hold_point = self.position().copy()
            self._hold_yaw = self.attitude().yaw
        err = self._hold_point - self.position()
        vel = self.velocity()
        ax = HOLD_KP * err[0] - HOLD_KD * vel[0]
        ay = HOLD_KP * err[1] - HOLD_KD * vel[1]
        roll, pitch = self._accel_to_tilt(ax, ay)
        vz = max(-1.0, min(1.0, VZ_GAIN * err[2]))
        yaw_rate = YAW_GAIN * wrap_angle(self._hold_yaw - self.attitude().yaw)
        return VirtualCommand(vz=vz, roll=roll, pitch=pitch, yaw_rate=yaw_rate)

    def _brake_command(self) -> VirtualCommand:
        vel = self.velocity()
        roll, pitch = self._accel_to_tilt(-BRAKE_GAIN * vel[0],
                                          -BRAKE_GAIN * vel[1])
        return VirtualCommand(vz=0.0, roll=roll, pitch=pitch, yaw_rate=0.0)

    def _goto_command(self, target: np.ndarray, target_yaw: Optional[float],
                      track_bearing: bool, cruise: float) -> tuple[VirtualCommand, bool]:
        """Velocity-field tracker toward a 3D point.  Returns (cmd, arrived)."""
        pos = self.position()
        vel = self.velocity()
        delta = target[:2] - pos[:2]
        dist = float(np.hypot(delta[0], delta[1]))
        if dist > 1e-9:
            direction = delta / dist
        else:
            direction = np.zeros(2)
        # Brake against the distance left after the plant's tracking lag so
        # the sqrt profile does not overshoot.
        closing = float(vel[0] * direction[0] + vel[1] * direction[1])
        lead = max(0.0, dist - max(0.0, closing) * TRAJ_LEAD)
        speed = min(cruise, math.sqrt(2.0 * TRAJ_ACCEL * lead), POS_GAIN * dist)
        v_des = direction * speed
        ax = VEL_GAIN * (v_des[0] - vel[0])
        ay = VEL_GAIN * (v_des[1] - vel[1])
        roll, pitch = self._accel_to_tilt(ax, ay)

        dz = target[2] - pos[2]
        vmax_z = self.params.get("drone/max_vertical_speed")
        vz = math.copysign(
            min(vmax_z, math.sqrt(2.0 * TRAJ_VZ_ACCEL * abs(dz)),
                VZ_GAIN * abs(dz)),
            dz,
        )

        yaw = self.attitude().yaw
        if track_bearing and dist > 0.5:
            want_yaw = math.atan2(delta[1], delta[0])
        elif target_yaw is not None:
            want_yaw = target_yaw
        else:
            want_yaw = yaw
        max_yaw = math.radians(self.params.get("drone/max_yaw_rate"))
        yaw_rate = max(-max_yaw, min(max_yaw, YAW_GAIN * wrap_angle(want_yaw - yaw)))

        arrived = (
            dist < ARRIVE_POS
            and abs(dz) < ARRIVE_POS
            and float(np.linalg.norm(vel)) < ARRIVE_SPEED
            and (target_yaw is None or abs(wrap_angle(target_yaw - yaw)) < ARRIVE_YAW)
        )
        return VirtualCommand(vz=vz, roll=roll, pitch=pitch,
                              yaw_rate=yaw_rate), arrived

    def _fence_clamp_target(self, target: np.ndarray, token, channel: str
                            ) -> np.ndarray:
        max_dist = self.params.get("drone/max_distance")
        max_alt = self.params.get("drone/max_altitude")
        anchor = self._home_anchor_xy()
        out = target.copy()
        d = float(np.linalg.norm(out[:2] - anchor))
        clamped = False
        if d > max_dist:
            out[:2] = anchor + (out[:2] - anchor) * (max_dist / d)
            clamped = True
        if out[2] > max_alt:
            out[2] = max_alt
            clamped = True
        if clamped:
            self._warn(token, channel, "target clamped to geofence")
        return out

    def _apply_fence(self, cmd: VirtualCommand) -> VirtualCommand:
        pos = self.position()
        vel = self.velocity()
        max_alt = self.params.get("drone/max_altitude")
        vz = min(cmd.vz, FENCE_GAIN * (max_alt - pos[2]))

        anchor = self._home_anchor_xy()
        rel = pos[:2] - anchor
        d = float(np.linalg.norm(rel))
        roll, pitch = cmd.roll, cmd.pitch
        if d > 1e-6:
            outward = rel / d
            v_out = float(vel[0] * outward[0] + vel[1] * outward[1])
            if v_out > 0.0:
                # Lead term covers the tilt reversal before braking bites.
                stop = d + v_out * TRAJ_LEAD + \
                    v_out * v_out / (2.0 * FENCE_BRAKE_ACCEL)
                if stop >= self.params.get("drone/max_distance"):
                    roll, pitch = self._accel_to_tilt(-BRAKE_GAIN * vel[0],
                                                      -BRAKE_GAIN * vel[1])
        return VirtualCommand(vz=vz, roll=roll, pitch=pitch,
                              yaw_rate=cmd.yaw_rate)

    def _stick_axis(self, name: str) -> int:
        if self._sticks is None:
            return 0
        if self.sim_time - self._sticks_received > COMMAND_STALENESS:
            return 0
        return int(self._sticks.get(name, 0))

    def _sticks_command(self) -> Optional[VirtualCommand]:
        if self._sticks is None:
            return None
        if self.sim_time - self._sticks_received > COMMAND_STALENESS:
            return None
        s = self._sticks
        axes = (s.get("x", 0), s.get("y", 0), s.get("z", 0), s.get("yaw", 0))
        if all(a == 0 for a in axes):
            return None
        limits = self._limits()
        return VirtualCommand(
            vz=axes[2] / 100.0 * limits.max_vertical_speed,
            roll=axes[1] / 100.0 * limits.max_tilt,
            pitch=axes[0] / 100.0 * limits.max_tilt,
            yaw_rate=axes[3] / 100.0 * limits.max_yaw_rate,
        )

    def _flight_command(self) -> VirtualCommand:
        """Resolve the active directive into a VirtualCommand and manage
        HOVERING/FLYING transitions and directive completion."""
        sticks = self._sticks_command()
        if sticks is not None:
            # Manual sticks preempt any offboard directive.
            if self.directive is not None:
                self.directive = None
            self._hold_point = None
            self._set_moving()
            return sticks

        directive = self.directive
        if isinstance(directive, _Manual):
            stale = self.sim_time - directive.received > COMMAND_STALENESS
            if stale or directive.command.is_zero():
                self.directive = None
            else:
                self._hold_point = None
                self._set_moving()
                return directive.command
        elif isinstance(directive, _Move):
            self._hold_point = None
            self._set_moving()
            cruise = self.params.get("drone/max_horizontal_speed")
            if not directive.turn_done:
                yaw = self.attitude().yaw
                err = wrap_angle(directive.target_yaw - yaw)
                if abs(err) < ARRIVE_YAW:
                    directive.turn_done = True
                max_yaw = math.radians(self.params.get("drone/max_yaw_rate"))
                rate = max(-max_yaw, min(max_yaw, YAW_GAIN * err))
                return VirtualCommand(yaw_rate=rate)
            cmd, arrived = self._goto_command(
                directive.target,
                directive.target_yaw,
                directive.yaw_mode == "track",
                cruise,
            )
            if arrived:
                self.directive = None
                self._hold_point = directive.target.copy()
                self._hold_yaw = (directive.target_yaw
                                  if directive.target_yaw is not None
                                  else self.attitude().yaw)
            else:
                return cmd
        elif isinstance(directive, _Rth):
            self._hold_point = None
            self._set_moving()
            return self._rth_command(directive)
        elif isinstance(directive, _PlanRun):
            self._hold_point = None
            self._set_moving()
            cmd = self._plan_command(directive)
            if cmd is not None:
                return cmd

        # No directive: brake, then hold position.
        speed = float(np.linalg.norm(self.velocity()[:2]))
        if speed > HOVER_SPEED:
            self._set_moving()
            return self._brake_command()
        if self.state == FlightState.FLYING:
            self._transition(FlightState.HOVERING)
        return self._hold_command()

    def _set_moving(self) -> None:
        if self.state == FlightState.HOVERING:
            self._transition(FlightState.FLYING)

    def _rth_command(self, rth: _Rth) -> VirtualCommand:
        pos = self.position()
        if rth.phase == "climb":
            if abs(pos[2] - rth.climb_z) < 0.3 and abs(self.velocity()[2]) < 0.2:
                rth.phase = "cruise"
            else:
                target = np.array([pos[0], pos[1], rth.climb_z])
                cmd, _ = self._goto_command(target, None, False,
                                            self.params.get(
                                                "drone/max_horizontal_speed"))
                return cmd
        target = np.array([rth.home_xy[0], rth.home_xy[1], rth.climb_z])
        cmd, arrived = self._goto_command(
            target, None, True,
            self.params.get("drone/max_horizontal_speed"))
        if not arrived:
            return cmd
        self.directive = None
        if rth.land:
            self._begin_landing()
        else:
            self._hold_point = target.copy()
        return VirtualCommand()

    def _plan_command(self, run: _PlanRun) -> Optional[VirtualCommand]:
        if run.pending_takeoff:
            # _tick_takeoff still owns the vertical profile.
            return None
        while run.index < len(run.waypoints):
            wp = run.waypoints[run.index]
            north, west = geo_to_local(wp.latitude, wp.longitude, *self.anchor)
            target = np.array([north, west, wp.altitude])
            pos = self.position()
            dist = float(np.linalg.norm(target - pos))
            if dist < WAYPOINT_GATE:
                run.index += 1
                continue
            heading = math.radians(wp.heading)
            cmd, arrived = self._goto_command(
                target, heading, False,
                self.params.get("drone/max_horizontal_speed"))
            if arrived:
                run.index += 1
                continue
            return cmd
        self.directive = None
        return None

    # ------------------------------------------------------------------
    # tick

    def tick(self) -> list[Event]:
        self.ticks += 1
        self._tick_pending_ops()
        self._drain_requests()

        state = self.state
        if state == FlightState.CONNECTING:
            self.plant.rest_on_ground(level=False)
            if self.sim_time - self._boot_at >= CONNECT_DELAY:
                self._transition(FlightState.LANDED)
        elif state in (FlightState.LANDED, FlightState.DISCONNECTED):
            self.plant.rest_on_ground(level=False)
        elif state == FlightState.EMERGENCY:
            if self.position()[2] > 0.0:
                self.plant.step_unpowered()
            else:
                self.plant.rest_on_ground()
        elif state == FlightState.TAKINGOFF:
            self._tick_takeoff()
        elif state == FlightState.LANDING:
            self._tick_landing()
        else:
            cmd = self._flight_command()
            cmd = self._apply_fence(cmd)
            cmd = clamp_command(cmd, self._limits())
            self.plant.tilt_rate_limit = math.radians(
                self.params.get("drone/max_pitch_roll_rate"))
            self.plant.step(cmd)

        self._tick_battery()
        self._tick_gimbal()
        self._tick_camera()

        events = self._events
        self._events = []
        return events

    def _tick_pending_ops(self) -> None:
        if not self._pending_ops:
            return
        due = [op for op in self._pending_ops if op[0] <= self.sim_time]
        if not due:
            return
        self._pending_ops = [op for op in self._pending_ops
                             if op[0] > self.sim_time]
        for _, op, token in due:
            if op == "boot":
                self._boot_at = self.sim_time
                self._transition(FlightState.CONNECTING)
            elif op == "calibrated":
                self._reply(token, _ok("calibration complete"))

    def _tick_takeoff(self) -> None:
        target = self._takeoff_base + TAKEOFF_ALTITUDE
        z = self.position()[2]
        vz = max(0.0, min(min(2.0, self.model.max_vertical_speed),
                          TAKEOFF_GAIN * (target - z)))
        self.plant.step(VirtualCommand(vz=vz))
        if abs(z - target) < 0.05 and abs(self.velocity()[2]) < 0.08:
            self._finish_takeoff()

    def _finish_takeoff(self) -> None:
        self._transition(FlightState.HOVERING)
        self._hold_point = self.position().copy()
        self._hold_yaw = self.attitude().yaw
        run = self.directive
        if isinstance(run, _PlanRun):
            run.pending_takeoff = False

    def _tick_landing(self) -> None:
        self.plant.step(VirtualCommand(vz=-LANDING_SPEED))
        if self.position()[2] <= 0.0:
            self.plant.rest_on_ground()
            self._transition(FlightState.LANDED)
            if self.camera.recording is not None and \
                    self.params.get("camera/autorecord"):
                self._finalize_recording()

    def _tick_battery(self) -> None:
        if self.state in AIRBORNE_STATES:
            self.battery.drain(self.dt)
        if (
            self.battery.percentage < LOW_BATTERY_PERCENT
            and not self._low_battery_latched
            and self.params.get("home/autotrigger")
            and self.state in (FlightState.HOVERING, FlightState.FLYING)
        ):
            self._low_battery_latched = True
            if not isinstance(self.directive, _Rth):
                self._warn(None, "battery/percentage",
                           "low battery, returning home")
                self._start_rth(None)

    def _tick_gimbal(self) -> None:
        if self._poi is not None:
            self._point_gimbal_at(self._poi["point"])
        max_rate = math.radians(self.params.get("gimbal/max_speed"))
        cam_axis = self._stick_axis("camera")
        if cam_axis != 0 and self._poi is None:
            self.gimbal.command_velocity(0.0, max_rate * cam_axis / 100.0, 0.0)
            self._stick_cam_active = True
        elif self._stick_cam_active:
            self.gimbal.command_velocity(0.0, 0.0, 0.0)
            self._stick_cam_active = False
        self.gimbal.tick(self.dt, self.attitude(), max_rate)

    def _point_gimbal_at(self, point: np.ndarray) -> None:
        cam = self.position() + euler_to_rotation(self.attitude()) @ CAMERA_OFFSET
        d = point - cam
        dist = float(np.linalg.norm(d))
        if dist < 0.5:
            return
        want_pitch = math.asin(max(-1.0, min(1.0, -d[2] / dist)))
        want_yaw = math.atan2(d[1], d[0])
        want = euler_to_rotation(EulerAngles(0.0, want_pitch, want_yaw))
        rel = euler_to_rotation(self.attitude()).T @ want
        e, _ = rotation_to_euler(rel)
        self.gimbal.mode = 0
        self.gimbal.frame = 1
        # Wire sign flip: command_position expects up-positive pitch.
        self.gimbal.command_position(1, 0.0, -e.pitch, e.yaw)

    def _tick_camera(self) -> None:
        zoom_speed = self.params.get("camera/max_zoom_speed")
        zoom_axis = self._stick_axis("zoom")
        if zoom_axis != 0:
            self.camera.command(1, zoom_speed * zoom_axis / 100.0, zoom_speed)
            self._stick_zoom_active = True
        elif self._stick_zoom_active:
            self.camera.command(1, 0.0, zoom_speed)
            self._stick_zoom_active = False
        self.camera.tick(self.dt, zoom_speed)
        series = self.camera.series
        if series is not None:
            if series["mode"] == 3:
                if self.sim_time >= series["next_time"]:
                    series["next_time"] += TIMELAPSE_INTERVAL
                    if self._capture_photo() is None:
                        self.camera.series = None
                        self._warn(None, "camera/image", "storage full, "
                                   "capture series stopped")
            else:
                moved = float(np.linalg.norm(
                    self.position()[:2] - series["last_pos"]))
                if moved >= GPSLAPSE_INTERVAL:
                    series["last_pos"] = self.position()[:2].copy()
                    if self._capture_photo() is None:
                        self.camera.series = None
                        self._warn(None, "camera/image", "storage full, "
                                   "capture series stopped")
        rec = self.camera.recording
        if rec is not None:
            pending = int((self.sim_time - rec["started"])
                          * VIDEO_BYTES_PER_SECOND)
            if pending >= self.storage.available():
                self._finalize_recording()
                self._warn(None, "storage/available",
                           "storage full, recording stopped")

    # ------------------------------------------------------------------
    # telemetry

    def link_quality(self) -> int:
        droop = self.config.link_droop_m
        if droop is None:
            return LINK_QUALITY
        d = float(np.linalg.norm(self.position()[:2] - self._home_anchor_xy()))
        return max(0, LINK_QUALITY - int(d / droop))

    def topic_payload(self, topic: str) -> dict:
        """Wire payload for one published topic at the current state."""
        stamp = self.stamp_ns()
        st = self.plant.state
        if topic == "battery/health":
            return {"stamp": stamp, "data": self.battery.health}
        if topic == "battery/percentage":
            return {"stamp": stamp, "data": int(self.battery.percentage)}
        if topic == "battery/voltage":
            return {"stamp": stamp, "data": round(self.battery.voltage(), 3)}
        if topic == "camera/awb_b_gain":
            return {"stamp": stamp, "data": AWB_B_GAIN}
        if topic == "camera/awb_r_gain":
            return {"stamp": stamp, "data": AWB_R_GAIN}
        if topic == "camera/exposure_time":
            return {"stamp": stamp, "data": EXPOSURE_TIME}
        if topic == "camera/iso_gain":
            return {"stamp": stamp, "data": ISO_GAIN}
        if topic == "camera/hfov":
            return {"stamp": stamp, "data": math.degrees(self.camera.hfov())}
        if topic == "camera/vfov":
            return {"stamp": stamp, "data": math.degrees(self.camera.vfov())}
        if topic == "camera/zoom":
            return {"stamp": stamp, "data": self.camera.zoom}
        if topic == "camera/camera_info":
            w = self.model.stream_width
            h = self.model.stream_height
            fx = (w / 2.0) / math.tan(self.camera.hfov() / 2.0)
            return {"stamp": stamp, "width": w, "height": h,
                    "fx": fx, "fy": fx, "cx": w / 2.0, "cy": h / 2.0}
        if topic == "camera/image":
            return self.camera.frame_payload(stamp)
        if topic == "drone/altitude":
            return {"stamp": stamp, "data": float(st.position[2])}
        if topic == "drone/altitude_above_to":
            return {"stamp": stamp,
                    "data": float(st.position[2] - self._takeoff_base)}
        if topic == "drone/attitude":
            q = rotation_to_quat(euler_to_rotation(st.attitude))
            return {"stamp": stamp, "w": q.w, "x": q.x, "y": q.y, "z": q.z}
        if topic == "drone/rpy":
            e = st.attitude
            return {"stamp": stamp, "x": math.degrees(e.roll),
                    "y": math.degrees(e.pitch), "z": math.degrees(e.yaw)}
        if topic == "drone/speed":
            e = st.attitude
            r = euler_to_rotation(e)
            v_body = r.T @ st.velocity
            return {"stamp": stamp, "x": float(v_body[0]),
                    "y": float(v_body[1]), "z": float(v_body[2])}
        if topic == "drone/state":
            return {"stamp": stamp, "data": self.state.value}
        if topic == "drone/gps/fix":
            return {"stamp": stamp, "data": True}
        if topic == "drone/gps/satellites":
            return {"stamp": stamp, "data": GPS_SATELLITES}
        if topic == "drone/gps/location":
            lat, lon, alt = self.geo_position()
            return {"stamp": stamp, "latitude": lat, "longitude": lon,
                    "altitude": alt}
        if topic == "gimbal/attitude/absolute":
            world = euler_to_rotation(st.attitude) @ euler_to_rotation(
                self.gimbal.attitude())
            q = rotation_to_quat(world)
            return {"stamp": stamp, "w": q.w, "x": q.x, "y": q.y, "z": q.z}
        if topic == "home/location":
            home = self._resolve_home()
            if home is None:
                xy = self._home_anchor_xy()
            else:
                xy = home[0]
            lat, lon = local_to_geo(xy[0], xy[1], *self.anchor)
            return {"stamp": stamp, "latitude": lat, "longitude": lon,
                    "altitude": 0.0}
        if topic == "link/quality":
            return {"stamp": stamp, "data": self.link_quality()}
        if topic == "skycontroller/attitude":
            return {"stamp": stamp, "w": 1.0, "x": 0.0, "y": 0.0, "z": 0.0}
        if topic == "skycontroller/rpy":
            return {"stamp": stamp, "x": 0.0, "y": 0.0, "z": 0.0}
        if topic == "skycontroller/command":
            s = self._sticks or {}
            fresh = self.sim_time - self._sticks_received <= COMMAND_STALENESS
            return {
                "stamp": stamp,
                "x": int(s.get("x", 0)) if fresh else 0,
                "y": int(s.get("y", 0)) if fresh else 0,
                "z": int(s.get("z", 0)) if fresh else 0,
                "yaw": int(s.get("yaw", 0)) if fresh else 0,
                "camera": int(s.get("camera", 0)) if fresh else 0,
                "zoom": int(s.get("zoom", 0)) if fresh else 0,
                "return_home": bool(s.get("return_home", False)) and fresh,
                "takeoff_land": bool(s.get("takeoff_land", False)) and fresh,
                "reset_camera": bool(s.get("reset_camera", False)) and fresh,
                "reset_zoom": bool(s.get("reset_zoom", False)) and fresh,
            }
        if topic == "storage/available":
            rec = self.camera.recording
            pending = 0
            if rec is not None:
                pending = int((self.sim_time - rec["started"])
                              * VIDEO_BYTES_PER_SECOND)
            return {"stamp": stamp, "data": self.storage.available(pending)}
        if topic == "time":
            ns = self.stamp_ns()
            return {"sec": ns // 1_000_000_000, "nanosec": ns % 1_000_000_000}
        raise KeyError("no payload builder for topic %r" % topic)


_SERVICE_HANDLERS = {
    "drone/takeoff": Vehicle._svc_takeoff,
    "drone/land": Vehicle._svc_land,
    "drone/emergency": Vehicle._svc_emergency,
    "drone/halt": Vehicle._svc_halt,
    "drone/reboot": Vehicle._svc_reboot,
    "drone/calibrate": Vehicle._svc_calibrate,
    "drone/arm": Vehicle._svc_arm,
    "drone/rth": Vehicle._svc_rth,
    "drone/poi": Vehicle._svc_poi,
    "home/navigate": Vehicle._svc_navigate,
    "home/set": Vehicle._svc_home_set,
    "flightplan/upload": Vehicle._svc_plan_upload,
    "flightplan/start": Vehicle._svc_plan_start,
    "flightplan/pause": Vehicle._svc_plan_pause,
    "flightplan/stop": Vehicle._svc_plan_stop,
    "gimbal/calibrate": Vehicle._svc_gimbal_calibrate,
    "gimbal/reset": Vehicle._svc_gimbal_reset,
    "camera/reset": Vehicle._svc_camera_reset,
    "camera/photo/take": Vehicle._svc_photo_take,
    "camera/photo/stop": Vehicle._svc_photo_stop,
    "camera/recording/start": Vehicle._svc_recording_start,
    "camera/recording/stop": Vehicle._svc_recording_stop,
    "skycontroller/offboard": Vehicle._svc_offboard,
    "storage/download": Vehicle._svc_storage_download,
    "storage/format": Vehicle._svc_storage_format,
}

_COMMAND_HANDLERS = {
    "drone/command": Vehicle._cmd_piloting,
    "drone/moveby": Vehicle._cmd_moveby,
    "drone/moveto": Vehicle._cmd_moveto,
    "gimbal/command": Vehicle._cmd_gimbal,
    "camera/command": Vehicle._cmd_camera,
    "skycontroller/command": Vehicle._cmd_sticks,
}
