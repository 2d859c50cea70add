"""Flight dynamics for the simulated quadrotor models.

The plant is deliberately simple but honest about the closed-loop behavior
of a small camera drone flown through its autopilot:

* attitude responds to tilt commands as a first-order lag (per-model time
  constant) with a slew limit,
* vertical velocity and yaw rate commands pass through short transport
  delays before their loops react,
* translation is a point mass under gravity, body-z thrust and quadratic
  horizontal drag, integrated with semi-implicit Euler.

The drag coefficient is derived so that the terminal speed at full tilt
equals the advertised maximum horizontal speed of each model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import EulerAngles, Vec3, euler_rates_to_body_rates, wrap_angle

G = 9.81  # m/s^2

# Shared closed-loop constants; per-model differences live in ModelParams.
VZ_TRACK_TAU = 0.10  # s, vertical velocity loop time constant
YAW_RATE_TAU = 0.10  # s, yaw rate loop time constant
THRUST_SAT_FACTOR = 2.0  # thrust ceiling as a multiple of hover thrust
NOMINAL_INERTIA_FACTOR = 0.01  # kg m^2 per kg, coarse body inertia scale
DEFAULT_TILT_RATE_LIMIT = math.radians(300.0)  # rad/s
MAX_STEP_DT = 0.01  # s

_ERR_DT = "dt must be in (0, %.3f] s, got %r" % (MAX_STEP_DT, "%s")


def derive_drag_coefficient(max_tilt: float, max_speed: float) -> float:
    """Quadratic drag coefficient k with terminal speed max_speed at max_tilt.

    Steady state at constant tilt a: G*tan(a) = k * v^2.
    """
    if not 0.0 < max_tilt < math.pi / 2.0:
        raise ValueError("max_tilt must be in (0, pi/2), got %r" % max_tilt)
    if max_speed <= 0.0:
        raise ValueError("max_speed must be positive, got %r" % max_speed)
    return G * math.tan(max_tilt) / (max_speed * max_speed)


@dataclass(frozen=True)
class ModelParams:
    """Physical and autopilot constants for one drone model."""

    name: str
    mass: float  # kg
    max_horizontal_speed: float  # m/s, terminal speed at max tilt
    max_vertical_speed: float  # m/s
    max_tilt: float  # rad
    max_yaw_rate: float  # rad/s
    max_flight_time: float  # s at hover, used for linear battery drain
    attitude_time_constant: float  # s
    vertical_delay: float  # s
    yaw_delay: float  # s
    battery_cells: int
    battery_capacity_mah: float
    max_zoom: float
    video_hfov: float  # rad, at zoom 1.0
    stream_width: int
    stream_height: int
    gimbal_pitch_range: tuple[float, float]  # rad
    gimbal_time_constant: float  # s
    max_wind_speed: float  # m/s, recorded only; the simulation has no wind
    drag_coefficient: float = field(init=False)  # 1/m

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "drag_coefficient",
            derive_drag_coefficient(self.max_tilt, self.max_horizontal_speed),
        )


def _model(name, mass, v_h, flight_min, cells, mah, zoom, hfov_deg, res,
           pitch_range_deg, tau_att, yaw_delay, tau_gimbal, wind) -> ModelParams:
    return ModelParams(
        name=name,
        mass=mass,
        max_horizontal_speed=v_h,
        max_vertical_speed=4.0,
        max_tilt=math.radians(40.0),
        max_yaw_rate=math.radians(200.0),
        max_flight_time=flight_min * 60.0,
        attitude_time_constant=tau_att,
        vertical_delay=0.15,
        yaw_delay=yaw_delay,
        battery_cells=cells,
        battery_capacity_mah=mah,
        max_zoom=zoom,
        video_hfov=math.radians(hfov_deg),
        stream_width=res[0],
        stream_height=res[1],
        gimbal_pitch_range=(
            math.radians(pitch_range_deg[0]),
            math.radians(pitch_range_deg[1]),
        ),
        gimbal_time_constant=tau_gimbal,
        max_wind_speed=wind,
    )


MODELS: dict[str, ModelParams] = {
    "4k": _model("4k", 0.320, 15.0, 25, 2, 2700.0, 3.0, 69.0, (1280, 720),
                 (-90.0, 90.0), 0.25, 0.10, 0.4, 13.9),
    "thermal": _model("thermal", 0.315, 15.0, 26, 2, 2700.0, 3.0, 69.0,
                      (1280, 720), (-90.0, 90.0), 0.25, 0.10, 0.4, 13.9),
    "usa": _model("usa", 0.499, 14.7, 32, 3, 3400.0, 32.0, 69.0, (1280, 720),
                  (-90.0, 90.0), 0.15, 0.10, 0.4, 14.7),
    "ai": _model("ai", 0.898, 16.0, 32, 3, 6800.0, 6.0, 68.0, (1920, 1080),
                 (-116.0, 176.0), 0.30, 0.20, 0.1, 12.7),
}

MODEL_NAMES = tuple(MODELS)


def model_params(name: str) -> ModelParams:
    try:
        return MODELS[name]
    except KeyError:
        raise ValueError(
            "unknown model %r (known: %s)" % (name, ", ".join(MODELS))
        ) from None


@dataclass(frozen=True)
class VirtualCommand:
    """Autopilot-level command: vertical speed, tilt targets, yaw rate."""

    vz: float = 0.0  # m/s, world +z
    roll: float = 0.0  # rad
    pitch: float = 0.0  # rad
    yaw_rate: float = 0.0  # rad/s

    def is_zero(self) -> bool:
        return self.vz == 0.0 and self.roll == 0.0 and self.pitch == 0.0 \
            and self.yaw_rate == 0.0


ZERO_COMMAND = VirtualCommand()


@dataclass(frozen=True)
class CommandLimits:
    """Saturation bounds applied to incoming piloting commands."""

    max_tilt: float  # rad
    max_vertical_speed: float  # m/s
    max_yaw_rate: float  # rad/s


def clamp_command(cmd: VirtualCommand, limits: CommandLimits) -> VirtualCommand:
    """Saturate a command to the given limits component-wise."""

    def clamp(v, m):
        return max(-m, min(m, v))

    return VirtualCommand(
        vz=clamp(cmd.vz, limits.max_vertical_speed),
        roll=clamp(cmd.roll, limits.max_tilt),
        pitch=clamp(cmd.pitch, limits.max_tilt),
        yaw_rate=clamp(cmd.yaw_rate, limits.max_yaw_rate),
    )


@dataclass(frozen=True)
class WrenchCommand:
    """Inner-loop output: collective thrust plus body torques."""

    thrust: float  # N
    torque_roll: float  # N m
    torque_pitch: float  # N m
    torque_yaw: float  # N m


@dataclass
class PlantState:
    """Kinematic state of one airframe in the world frame."""

    position: Vec3
    velocity: Vec3
    attitude: EulerAngles
    body_rates: Vec3

    def copy(self) -> "PlantState":
        return PlantState(
            self.position.copy(),
            self.velocity.copy(),
            self.attitude,
            self.body_rates.copy(),
        )


def initial_state(position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> PlantState:
    return PlantState(
        position=np.array(position, dtype=float),
        velocity=np.zeros(3),
        attitude=EulerAngles(0.0, 0.0, yaw),
        body_rates=np.zeros(3),
    )


def cascade(command: VirtualCommand, state: PlantState,
            params: ModelParams) -> WrenchCommand:
    """One pass of the control cascade with no accumulated state.

    Thrust holds altitude against tilt and corrects vertical speed error;
    torques are the attitude/yaw-rate loop demands scaled by a nominal
    inertia.  Level hover at rest with a zero command yields exactly
    (mass*G, 0, 0, 0).
    """
    att = state.attitude
    hover = params.mass * G / (math.cos(att.roll) * math.cos(att.pitch))
    kp_vz = params.mass / VZ_TRACK_TAU
    thrust = hover + kp_vz * (command.vz - state.velocity[2])
    thrust = max(0.0, min(THRUST_SAT_FACTOR * params.mass * G, thrust))

    inertia = params.mass * NOMINAL_INERTIA_FACTOR
    tau = params.attitude_time_constant
    roll_rate_dem = (command.roll - att.roll) / tau
    pitch_rate_dem = (command.pitch - att.pitch) / tau
    return WrenchCommand(
        thrust=thrust,
        torque_roll=inertia * (roll_rate_dem - state.body_rates[0]) / tau,
        torque_pitch=inertia * (pitch_rate_dem - state.body_rates[1]) / tau,
        torque_yaw=inertia
        * (command.yaw_rate - state.body_rates[2])
        / YAW_RATE_TAU,
    )


class _DelayLine:
    """Fixed-length transport delay, at least one step long."""

    def __init__(self, delay: float, dt: float):
        self._buf = [0.0] * max(1, round(delay / dt))
        self._idx = 0

    def push(self, value: float) -> float:
        out = self._buf[self._idx]
        self._buf[self._idx] = value
        self._idx = (self._idx + 1) % len(self._buf)
        return out

    def reset(self) -> None:
        self._buf = [0.0] * len(self._buf)
        self._idx = 0


class Plant:
    """Closed-loop airframe stepped at a fixed rate.

    Powered flight integrates the cascade; unpowered flight (motors cut)
    is ballistic with the same drag and ground clamp.
    """

    def __init__(self, params: ModelParams, dt: float,
                 position=(0.0, 0.0, 0.0), yaw: float = 0.0):
        if not 0.0 < dt <= MAX_STEP_DT:
            raise ValueError(_ERR_DT % dt)
        self.params = params
        self.dt = dt
        self.state = initial_state(position, yaw)
        self.tilt_rate_limit = DEFAULT_TILT_RATE_LIMIT  # rad/s
        self._vz_delay = _DelayLine(params.vertical_delay, dt)
        self._yaw_delay = _DelayLine(params.yaw_delay, dt)
        self._yaw_rate = 0.0  # rad/s, current inner-loop yaw rate
        self._vz_integ = 0.0  # N, integral correction on vertical speed

    def reset(self, position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> None:
        self.state = initial_state(position, yaw)
        self._vz_delay.reset()
        self._yaw_delay.reset()
        self._yaw_rate = 0.0
        self._vz_integ = 0.0

    def step(self, command: VirtualCommand) -> PlantState:
        dt = self.dt
        p = self.params
        st = self.state

        vz_cmd = self._vz_delay.push(command.vz)
        yaw_rate_cmd = self._yaw_delay.push(command.yaw_rate)

        # Attitude lag with slew limit.
        alpha = dt / p.attitude_time_constant
        max_step = self.tilt_rate_limit * dt
        att = st.attitude

        def track(current, target):
            delta = alpha * (target - current)
            return current + max(-max_step, min(max_step, delta))

        roll = track(att.roll, command.roll)
        pitch = track(att.pitch, command.pitch)
        self._yaw_rate += (dt / YAW_RATE_TAU) * (yaw_rate_cmd - self._yaw_rate)
        yaw = wrap_angle(att.yaw + self._yaw_rate * dt)
        new_att = EulerAngles(roll, pitch, yaw)

        # Vertical speed PI on the delayed setpoint, with the integrator
        # frozen while thrust is saturated.
        cos_tilt = math.cos(roll) * math.cos(pitch)
        hover = p.mass * G / cos_tilt
        kp = p.mass / VZ_TRACK_TAU
        ki = 2.0 * p.mass
        err = vz_cmd - st.velocity[2]
        thrust_raw = hover + kp * err + self._vz_integ
        thrust_max = THRUST_SAT_FACTOR * p.mass * G
        thrust = max(0.0, min(thrust_max, thrust_raw))
        if thrust == thrust_raw:
            self._vz_integ += ki * err * dt

        self._integrate(new_att, thrust, dt)
        return self.state

    def step_unpowered(self) -> PlantState:
        """Ballistic step with motors cut: zero thrust, attitude frozen."""
        self._vz_delay.push(0.0)
        self._yaw_delay.push(0.0)
        self._yaw_rate = 0.0
        self._vz_integ = 0.0
        self._integrate(self.state.attitude, 0.0, self.dt)
        return self.state

    def rest_on_ground(self, level: bool = True) -> PlantState:
        """Hold the airframe parked: zero motion, optional level attitude."""
        st = self.state
        st.velocity[:] = 0.0
        st.position[2] = 0.0
        st.body_rates[:] = 0.0
        if level:
            st.attitude = EulerAngles(0.0, 0.0, st.attitude.yaw)
        self._vz_delay.reset()
        self._yaw_delay.reset()
        self._yaw_rate = 0.0
        self._vz_integ = 0.0
        return st

    def _integrate(self, new_att: EulerAngles, thrust: float, dt: float) -> None:
        p = self.params
        st = self.state
        old_att = st.attitude

        cf, sf = math.cos(new_att.roll), math.sin(new_att.roll)
        ct, stt = math.cos(new_att.pitch), math.sin(new_att.pitch)
        cp, sp = math.cos(new_att.yaw), math.sin(new_att.yaw)
        # Body z axis in world coordinates (third column of R).
        body_z = np.array([sf * sp + cf * cp * stt, cf * sp * stt - cp * sf,
                           cf * ct])

        accel = (thrust / p.mass) * body_z
        accel[2] -= G
        vx, vy = st.velocity[0], st.velocity[1]
        h_speed = math.hypot(vx, vy)
        k = p.drag_coefficient
        accel[0] -= k * h_speed * vx
        accel[1] -= k * h_speed * vy

        st.velocity += accel * dt
        st.position += st.velocity * dt

        euler_rates = np.array(
            [
                wrap_angle(new_att.roll - old_att.roll) / dt,
                wrap_angle(new_att.pitch - old_att.pitch) / dt,
                wrap_angle(new_att.yaw - old_att.yaw) / dt,
            ]
        )
        st.attitude = new_att
        st.body_rates = euler_rates_to_body_rates(new_att, euler_rates)

        if st.position[2] <= 0.0:
            st.position[2] = 0.0
            if st.velocity[2] < 0.0:
                st.velocity[:] = 0.0

    def snapshot(self) -> PlantState:
        return self.state.copy()


def step(state: PlantState, command: VirtualCommand, params: ModelParams,
         dt: float) -> PlantState:
    """Single stateless step (delay lines primed with the command itself).

    Useful for quick open-loop checks; closed-loop simulation should use a
    Plant instance so transport delays and integrators persist.
    """
    plant = Plant(params, dt)
    plant.state = state.copy()
    # Prime delays so the command is already in effect.
    for _ in range(len(plant._vz_delay._buf)):
        plant._vz_delay.push(command.vz)
    for _ in range(len(plant._yaw_delay._buf)):
        plant._yaw_delay.push(command.yaw_rate)
    plant._yaw_rate = command.yaw_rate
    return plant.step(command)
