"""Fleet configuration: YAML file, environment overrides, CLI flags.

Precedence, lowest to highest: built-in defaults, config file, SIMD_*
environment variables, command line flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .dynamics import MODELS
from .vehicle import DEFAULT_STORAGE_BYTES

DEFAULT_BASE_PORT = 9050
DEFAULT_TICK_RATE = 200.0
MAX_REALTIME_FACTOR = 1000.0

ENV_PREFIX = "SIMD_"


class ConfigError(ValueError):
    """The fleet configuration is unusable."""


@dataclass
class DroneConfig:
    name: str
    model: str
    port: int
    latitude: float = 48.0
    longitude: float = 11.0
    yaw: float = 0.0
    storage_bytes: int = DEFAULT_STORAGE_BYTES


@dataclass
class FleetConfig:
    base_port: int = DEFAULT_BASE_PORT
    ws_port: Optional[int] = None
    realtime_factor: float = 1.0
    tick_rate: float = DEFAULT_TICK_RATE
    log_level: str = "info"
    require_arm: bool = False
    ground_station: Optional[tuple[float, float]] = None
    drones: list[DroneConfig] = field(default_factory=list)

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate

    @property
    def fleet_port(self) -> int:
        return self.base_port - 1

    def validate(self) -> None:
        if self.tick_rate < 100.0:
            raise ConfigError("tick_rate %.1f below 100 Hz makes the "
                              "integrator step too coarse" % self.tick_rate)
        if self.realtime_factor < 0.0:
            raise ConfigError("realtime_factor must be >= 0 (0 means gated)")
        if not self.drones:
            raise ConfigError("fleet has no drones")
        names = set()
        ports = {self.fleet_port: "fleet port"}
        if self.ws_port is not None:
            if self.ws_port in ports:
                raise ConfigError("ws_port %d collides with the fleet port"
                                  % self.ws_port)
            ports[self.ws_port] = "websocket port"
        for drone in self.drones:
            if drone.name in names:
                raise ConfigError("duplicate drone name %r" % drone.name)
            names.add(drone.name)
            if not drone.name or "/" in drone.name:
                raise ConfigError("drone name %r must be non-empty and "
                                  "slash-free" % drone.name)
            if drone.port in ports:
                raise ConfigError(
                    "port %d used by both %s and drone %r"
                    % (drone.port, ports[drone.port], drone.name))
            ports[drone.port] = "drone %r" % drone.name
            if drone.model not in MODELS:
                raise ConfigError("drone %r: unknown model %r (have %s)"
                                  % (drone.name, drone.model,
                                     ", ".join(sorted(MODELS))))


def default_fleet() -> FleetConfig:
    config = FleetConfig()
    config.drones = [DroneConfig(name="anafi", model="4k",
                                 port=config.base_port)]
    return config


def _as_float(value, what: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError("%s: expected a number, got %r" % (what, value))


def _as_int(value, what: str) -> int:
    try:
        if isinstance(value, bool):
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError("%s: expected an integer, got %r" % (what, value))


def load_config(path: Optional[str] = None,
                env: Optional[dict] = None,
                overrides: Optional[dict] = None) -> FleetConfig:
    """Build the runtime FleetConfig from all sources and validate it."""
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
        config = parse_config(raw, origin=path)
    else:
        config = default_fleet()

    env = dict(os.environ if env is None else env)
    if ENV_PREFIX + "BASE_PORT" in env:
        _rebase_ports(config, _as_int(env[ENV_PREFIX + "BASE_PORT"],
                                      "SIMD_BASE_PORT"))
    if ENV_PREFIX + "REALTIME_FACTOR" in env:
        config.realtime_factor = _as_float(
            env[ENV_PREFIX + "REALTIME_FACTOR"], "SIMD_REALTIME_FACTOR")
    if ENV_PREFIX + "WS_PORT" in env:
        config.ws_port = _as_int(env[ENV_PREFIX + "WS_PORT"], "SIMD_WS_PORT")
    if ENV_PREFIX + "LOG_LEVEL" in env:
        config.log_level = str(env[ENV_PREFIX + "LOG_LEVEL"])

    overrides = overrides or {}
    if overrides.get("base_port") is not None:
        _rebase_ports(config, int(overrides["base_port"]))
    if overrides.get("realtime_factor") is not None:
        config.realtime_factor = float(overrides["realtime_factor"])
    if overrides.get("ws_port") is not None:
        config.ws_port = int(overrides["ws_port"])
    if overrides.get("log_level") is not None:
        config.log_level = str(overrides["log_level"])

    config.realtime_factor = min(config.realtime_factor, MAX_REALTIME_FACTOR)
    config.validate()
    return config


def _rebase_ports(config: FleetConfig, new_base: int) -> None:
    """Move every auto-assigned drone port along with the base port."""
    old_base = config.base_port
    config.base_port = new_base
    for index, drone in enumerate(config.drones):
        if drone.port == old_base + index:
            drone.port = new_base + index


def parse_config(raw, origin: str = "<config>") -> FleetConfig:
    if raw is None:
        raise ConfigError("%s: empty config" % origin)
    if not isinstance(raw, dict):
        raise ConfigError("%s: top level must be a mapping" % origin)
    fleet = raw.get("fleet", raw)
    if not isinstance(fleet, dict):
        raise ConfigError("%s: 'fleet' must be a mapping" % origin)

    config = FleetConfig()
    if "base_port" in fleet:
        config.base_port = _as_int(fleet["base_port"], "base_port")
    if "ws_port" in fleet:
        config.ws_port = _as_int(fleet["ws_port"], "ws_port")
    if "realtime_factor" in fleet:
        config.realtime_factor = _as_float(fleet["realtime_factor"],
                                           "realtime_factor")
    if "tick_rate" in fleet:
        config.tick_rate = _as_float(fleet["tick_rate"], "tick_rate")
    if "log_level" in fleet:
        config.log_level = str(fleet["log_level"])
    if "require_arm" in fleet:
        config.require_arm = bool(fleet["require_arm"])
    if "ground_station" in fleet:
        gs = fleet["ground_station"]
        if not isinstance(gs, dict) or "latitude" not in gs \
                or "longitude" not in gs:
            raise ConfigError("ground_station needs latitude and longitude")
        config.ground_station = (_as_float(gs["latitude"], "latitude"),
                                 _as_float(gs["longitude"], "longitude"))

    drones = fleet.get("drones")
    if not isinstance(drones, list) or not drones:
        raise ConfigError("%s: 'drones' must be a non-empty list" % origin)
    for index, entry in enumerate(drones):
        if not isinstance(entry, dict):
            raise ConfigError("drone %d: expected a mapping" % index)
        if "name" not in entry or "model" not in entry:
            raise ConfigError("drone %d: 'name' and 'model' are required"
                              % index)
        drone = DroneConfig(
            name=str(entry["name"]),
            model=str(entry["model"]),
            port=_as_int(entry.get("port", config.base_port + index),
                         "drone %d port" % index),
        )
        if "latitude" in entry:
            drone.latitude = _as_float(entry["latitude"], "latitude")
        if "longitude" in entry:
            drone.longitude = _as_float(entry["longitude"], "longitude")
        if "yaw" in entry:
            drone.yaw = _as_float(entry["yaw"], "yaw")
        if "storage_bytes" in entry:
            drone.storage_bytes = _as_int(entry["storage_bytes"],
                                          "storage_bytes")
        config.drones.append(drone)
    return config
