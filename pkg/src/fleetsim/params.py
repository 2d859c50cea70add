"""Per-drone runtime parameters.

Floats with a range clamp on set; enumerated values reject anything outside
the set; booleans and strings are type-checked.  drone/model is fixed at
spawn time and read-only afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional


class ParameterError(Exception):
    """Base for parameter store failures."""


class UnknownParameterError(ParameterError):
    pass


class ParameterTypeError(ParameterError):
    pass


class ParameterValueError(ParameterError):
    pass


class ReadOnlyParameterError(ParameterError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # 'float' | 'int' | 'bool' | 'string'
    default: Any  # None when the value is assigned at spawn
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    choices: Optional[tuple] = None
    unit: str = ""
    read_only: bool = False
    description: str = ""


def _f(name, default, lo, hi, unit, desc):
    return ParamSpec(name, "float", default, minimum=lo, maximum=hi, unit=unit,
                     description=desc)


def _i(name, default, choices, desc):
    return ParamSpec(name, "int", default, choices=tuple(choices),
                     description=desc)


def _b(name, default, desc):
    return ParamSpec(name, "bool", default, description=desc)


PARAM_SPECS: dict[str, ParamSpec] = {
    s.name: s
    for s in (
        _b("camera/autorecord", False, "start recording on take-off"),
        _i("camera/ev_compensation", 9, (0, 3, 6, 9, 12, 15, 18),
           "EV compensation index"),
        _b("camera/hdr", True, "high dynamic range capture"),
        _f("camera/max_zoom_speed", 10.0, 0.1, 10.0, "tan(deg)/s",
           "zoom slew limit"),
        _i("camera/mode", 0, (0, 1), "0: recording, 1: photo"),
        _b("camera/relative", False, "interpret commands relative to camera pitch"),
        _i("camera/rendering", 0, (0, 1, 2), "stream rendering mode"),
        _i("camera/streaming", 0, (0, 1, 2), "streaming mode"),
        _i("camera/style", 0, (0, 1, 2, 3), "image style"),
        _b("drone/banked_turn", True, "banked turn flag (stored only)"),
        _f("drone/max_altitude", 2.0, 0.5, 4000.0, "m", "altitude ceiling"),
        _f("drone/max_distance", 10.0, 10.0, 4000.0, "m",
           "ground distance fence radius"),
        _f("drone/max_horizontal_speed", 1.0, 0.1, 15.0, "m/s",
           "autopilot trajectory speed limit"),
        _f("drone/max_pitch_roll", 10.0, 1.0, 40.0, "deg", "tilt limit"),
        _f("drone/max_pitch_roll_rate", 200.0, 40.0, 300.0, "deg/s",
           "tilt slew limit"),
        _f("drone/max_vertical_speed", 1.0, 0.1, 4.0, "m/s",
           "vertical speed limit"),
        _f("drone/max_yaw_rate", 180.0, 3.0, 200.0, "deg/s", "yaw rate limit"),
        ParamSpec("drone/model", "string", None,
                  choices=("4k", "thermal", "usa", "ai", "unknown"),
                  read_only=True, description="airframe model, set at spawn"),
        _f("gimbal/max_speed", 180.0, 1.0, 180.0, "deg/s", "gimbal slew limit"),
        _b("home/autotrigger", True, "return home on low battery"),
        _i("home/ending_behavior", 1, (0, 1), "0: land, 1: hover"),
        _f("home/min_altitude", 20.0, 20.0, 100.0, "m",
           "minimum altitude for the return leg"),
        _b("home/precise", True, "precise home flag (stored only)"),
        _i("home/type", 4, (1, 3, 4),
           "1: take-off location, 3: custom, 4: pilot"),
        ParamSpec("storage/download_folder", "string", "~/Pictures/Anafi",
                  description="media download destination"),
    )
}

PARAM_NAMES = tuple(sorted(PARAM_SPECS))


class ParameterStore:
    """Validated key-value store over PARAM_SPECS."""

    def __init__(self, model: str):
        if model not in PARAM_SPECS["drone/model"].choices:
            raise ParameterValueError("unknown model %r" % model)
        self._model = model
        self._values: dict[str, Any] = {}
        self.reset()

    def reset(self) -> None:
        self._values = {
            name: spec.default for name, spec in PARAM_SPECS.items()
        }
        self._values["drone/model"] = self._model

    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES

    def get(self, name: str) -> Any:
        try:
            return self._values[name]
        except KeyError:
            raise UnknownParameterError("unknown parameter %r" % name) from None

    def set(self, name: str, value: Any) -> Any:
        """Validate and store; returns the value actually stored.

        Ranged floats clamp, enumerated values must match exactly.
        """
        spec = PARAM_SPECS.get(name)
        if spec is None:
            raise UnknownParameterError("unknown parameter %r" % name)
        if spec.read_only:
            raise ReadOnlyParameterError("%s is read-only" % name)
        stored = _validate(spec, value)
        self._values[name] = stored
        return stored

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)


def _validate(spec: ParamSpec, value: Any) -> Any:
    if spec.kind == "bool":
        if not isinstance(value, bool):
            raise ParameterTypeError("%s expects a bool" % spec.name)
        return value
    if spec.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParameterTypeError("%s expects an int" % spec.name)
        if spec.choices is not None and value not in spec.choices:
            raise ParameterValueError(
                "%s must be one of %s, got %r"
                % (spec.name, list(spec.choices), value)
            )
        return value
    if spec.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterTypeError("%s expects a number" % spec.name)
        v = float(value)
        if v != v:  # NaN
            raise ParameterValueError("%s rejects NaN" % spec.name)
        if spec.minimum is not None:
            v = max(spec.minimum, v)
        if spec.maximum is not None:
            v = min(spec.maximum, v)
        return v
    if spec.kind == "string":
        if not isinstance(value, str):
            raise ParameterTypeError("%s expects a string" % spec.name)
        if spec.choices is not None and value not in spec.choices:
            raise ParameterValueError(
                "%s must be one of %s" % (spec.name, list(spec.choices))
            )
        return value
    raise ParameterError("bad spec kind %r" % spec.kind)
