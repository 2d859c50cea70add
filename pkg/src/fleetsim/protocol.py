"""Length-prefixed JSON envelope protocol and the channel registry.

Frames are a 4-byte big-endian body length followed by a UTF-8 JSON object:

    {"kind": ..., "channel": ..., "seq": ..., "stamp": ..., "payload": {...}}

Angles, speeds and percentages on the wire are degrees, m/s and percent;
radians never cross a socket.  Payload stamps carry simulation time in
nanoseconds; the envelope stamp is the sender's wall clock.

Error handling is layered: a frame whose body fails to parse or validate
yields a ProtocolError value and the stream stays usable, while a length
prefix beyond the frame cap desynchronizes the stream and raises
FramingError, after which the connection must be dropped.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .params import PARAM_NAMES, PARAM_SPECS

PROTOCOL_VERSION = "1"

HEADER = struct.Struct(">I")
MAX_BODY = 16 * 1024 * 1024  # bytes

KINDS = ("PUB", "SUB", "UNSUB", "REQ", "REP", "PARAM_SET", "PARAM_GET",
         "PARAM_VAL", "ERR")
MAX_SEQ = 2**64
MAX_STAMP = 2**63

# Channels the daemon invents for plumbing (handshake, fleet discovery,
# gated time advance, media streaming).  Everything else on the wire is the
# drone-facing API surface.
SOURCE_API = "api"
SOURCE_PLUMBING = "plumbing"


class ProtocolError(Exception):
    """A frame body that parses or validates incorrectly."""


class FramingError(ProtocolError):
    """A violation of the length-prefixed framing; the stream is lost."""


@dataclass(frozen=True)
class Envelope:
    kind: str
    channel: str
    seq: int
    stamp: int
    payload: dict

    def reply(self, kind: str, payload: dict, stamp: int = 0) -> "Envelope":
        """Envelope answering this one: same channel, echoed seq."""
        return Envelope(kind, self.channel, self.seq, stamp, payload)


# --------------------------------------------------------------------------
# payload schemas


@dataclass(frozen=True)
class Field:
    type: str  # 'float' | 'int' | 'bool' | 'str' | 'array'
    required: bool = True
    lo: Optional[float] = None
    hi: Optional[float] = None
    choices: Optional[tuple] = None
    items: Optional["Schema"] = None  # for arrays of objects


@dataclass(frozen=True)
class Schema:
    name: str
    fields: dict[str, Field] = field(default_factory=dict)


def _check_field(schema: str, name: str, spec: Field, value: Any) -> None:
    t = spec.type
    if t == "bool":
        if not isinstance(value, bool):
            raise ProtocolError("%s.%s must be a bool" % (schema, name))
        return
    if t == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProtocolError("%s.%s must be an int" % (schema, name))
    elif t == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProtocolError("%s.%s must be a number" % (schema, name))
        if value != value or value in (float("inf"), float("-inf")):
            raise ProtocolError("%s.%s must be finite" % (schema, name))
    elif t == "str":
        if not isinstance(value, str):
            raise ProtocolError("%s.%s must be a string" % (schema, name))
        return
    elif t == "array":
        if not isinstance(value, list):
            raise ProtocolError("%s.%s must be an array" % (schema, name))
        for entry in value:
            if not isinstance(entry, dict):
                raise ProtocolError("%s.%s entries must be objects" % (schema, name))
            validate_payload(spec.items, entry)
        return
    else:
        raise ProtocolError("unknown field type %r" % t)
    if spec.choices is not None and value not in spec.choices:
        raise ProtocolError(
            "%s.%s must be one of %s" % (schema, name, list(spec.choices))
        )
    if spec.lo is not None and value < spec.lo:
        raise ProtocolError("%s.%s below %s" % (schema, name, spec.lo))
    if spec.hi is not None and value > spec.hi:
        raise ProtocolError("%s.%s above %s" % (schema, name, spec.hi))


def validate_payload(schema: Schema, payload: dict) -> None:
    """Strict structural validation: required fields, types, no extras."""
    for name, spec in schema.fields.items():
        if name not in payload:
            if spec.required:
                raise ProtocolError("%s missing field %r" % (schema.name, name))
            continue
        _check_field(schema.name, name, spec, payload[name])
    for key in payload:
        if key not in schema.fields:
            raise ProtocolError("%s has unknown field %r" % (schema.name, key))


def _schema(name: str, /, **fields: Field) -> Schema:
    return Schema(name, fields)


_STAMP = Field("int", required=False, lo=0, hi=MAX_STAMP)


def _telemetry(name: str, /, **fields: Field) -> Schema:
    return _schema(name, stamp=_STAMP, **fields)


EMPTY = _schema("Empty")

# std_msgs-style scalar payloads
UINT8 = _telemetry("UInt8", data=Field("int", lo=0, hi=255))
UINT16 = _telemetry("UInt16", data=Field("int", lo=0, hi=65535))
UINT64 = _telemetry("UInt64", data=Field("int", lo=0, hi=2**64 - 1))
FLOAT32 = _telemetry("Float32", data=Field("float"))
BOOL = _telemetry("Bool", data=Field("bool"))
STRING = _telemetry("String", data=Field("str"))
TIME = _schema("Time", sec=Field("int", lo=0), nanosec=Field("int", lo=0, hi=999_999_999))
VECTOR3 = _telemetry("Vector3Stamped", x=Field("float"), y=Field("float"),
                     z=Field("float"))
QUATERNION = _telemetry("QuaternionStamped", w=Field("float"), x=Field("float"),
                        y=Field("float"), z=Field("float"))
NAVSATFIX = _telemetry("NavSatFix", latitude=Field("float"),
                       longitude=Field("float"), altitude=Field("float"))
LOCATION_MSG = _telemetry("Location", latitude=Field("float"),
                          longitude=Field("float"), altitude=Field("float"))
CAMERA_INFO = _telemetry("CameraInfo", width=Field("int", lo=1),
                         height=Field("int", lo=1), fx=Field("float"),
                         fy=Field("float"), cx=Field("float"), cy=Field("float"))
IMAGE = _telemetry("Image", width=Field("int", lo=1), height=Field("int", lo=1),
                   encoding=Field("str"), frame=Field("int", lo=0),
                   data=Field("str"))

# command payloads (client -> drone)
PILOTING_COMMAND = _telemetry(
    "PilotingCommand",
    roll=Field("float"),  # deg, + rolls right
    pitch=Field("float"),  # deg, + flies forward
    yaw=Field("float"),  # deg/s
    gaz=Field("float"),  # m/s, + climbs
)
MOVEBY_COMMAND = _telemetry(
    "MoveByCommand",
    dx=Field("float"),  # m forward
    dy=Field("float"),  # m left
    dz=Field("float"),  # m up
    dyaw=Field("float"),  # deg, + turns counterclockwise (toward +y)
)
MOVETO_COMMAND = _telemetry(
    "MoveToCommand",
    latitude=Field("float", lo=-90.0, hi=90.0),
    longitude=Field("float", lo=-180.0, hi=180.0),
    altitude=Field("float"),
    heading=Field("float"),
    orientation_mode=Field("int", choices=(0, 1, 2, 3)),
)
GIMBAL_COMMAND = _telemetry(
    "GimbalCommand",
    mode=Field("int", choices=(0, 1)),  # 0: position, 1: velocity
    frame=Field("int", choices=(0, 1, 2)),  # 0: none, 1: relative, 2: absolute
    roll=Field("float"),  # deg or deg/s
    pitch=Field("float"),
    yaw=Field("float"),
)
CAMERA_COMMAND = _telemetry(
    "CameraCommand",
    mode=Field("int", choices=(0, 1)),  # 0: level, 1: velocity
    zoom=Field("float"),
)
_AXIS = Field("int", lo=-100, hi=100)
SKYCONTROLLER_COMMAND = _telemetry(
    "SkycontrollerCommand",
    x=_AXIS, y=_AXIS, z=_AXIS, yaw=_AXIS, camera=_AXIS, zoom=_AXIS,
    return_home=Field("bool"),
    takeoff_land=Field("bool"),
    reset_camera=Field("bool"),
    reset_zoom=Field("bool"),
)
MEDIA_CHUNK = _telemetry(
    "MediaChunk",
    media_id=Field("str"),
    kind=Field("str"),
    size=Field("int", lo=0),
    data=Field("str"),
)

# service payloads
_OK = Field("bool")
_MSG = Field("str")
REPLY = _schema("Reply", success=_OK, message=_MSG)
SETBOOL_REQUEST = _schema("SetBool", data=Field("bool"))
PHOTO_REQUEST = _schema(
    "Photo",
    mode=Field("int", choices=(0, 1, 2, 3, 4)),
    photo_format=Field("int", choices=(0, 1), required=False),
    file_format=Field("int", choices=(0, 1, 2), required=False),
)
PHOTO_REPLY = _schema("PhotoReply", success=_OK, message=_MSG,
                      media_id=Field("str", required=False))
RECORDING_REQUEST = _schema("Recording", mode=Field("int", choices=(0, 1, 2, 3)))
RECORDING_REPLY = _schema("RecordingReply", success=_OK, message=_MSG,
                          media_id=Field("str", required=False))
FLIGHTPLAN_REQUEST = _schema("FlightPlan", file=Field("str"), uid=Field("str"))
FLIGHTPLAN_REPLY = _schema("FlightPlanReply", success=_OK, message=_MSG,
                           uid=Field("str", required=False))
LOCATION_REQUEST = _schema("LocationRequest", latitude=Field("float", lo=-90, hi=90),
                           longitude=Field("float", lo=-180, hi=180),
                           altitude=Field("float"))
POI_REQUEST = _schema("PilotedPOI", latitude=Field("float", lo=-90, hi=90),
                      longitude=Field("float", lo=-180, hi=180),
                      altitude=Field("float"), locked_gimbal=Field("bool"))
HELLO_REQUEST = _schema("Hello", client=Field("str", required=False))
HELLO_REPLY = _schema("HelloReply", success=_OK, message=_MSG,
                      name=Field("str"), model=Field("str"),
                      version=Field("str"), protocol=Field("str"))
FLEET_INFO_REPLY = _schema(
    "FleetInfoReply", success=_OK, message=_MSG,
    drones=Field("array", items=_schema(
        "FleetDrone", name=Field("str"), model=Field("str"),
        port=Field("int", lo=1, hi=65535))),
)
ADVANCE_REQUEST = _schema("SimAdvance", until=Field("float", lo=0.0))
ADVANCE_REPLY = _schema("SimAdvanceReply", success=_OK, message=_MSG,
                        time=Field("float", required=False))
ERROR_PAYLOAD = _schema("Error", error=Field("str"))


# --------------------------------------------------------------------------
# channel registry


@dataclass(frozen=True)
class TopicSpec:
    name: str
    type_name: str
    schema: Schema
    rate_hz: Optional[float]  # None for command/event channels
    direction: str  # 'out' (drone publishes), 'in' (client publishes), 'both'
    source: str = SOURCE_API


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    type_name: str
    request: Schema
    reply: Schema
    source: str = SOURCE_API


def _out(name, type_name, schema, rate) -> TopicSpec:
    return TopicSpec(name, type_name, schema, rate, "out")


def _in(name, type_name, schema) -> TopicSpec:
    return TopicSpec(name, type_name, schema, None, "in")


# Published telemetry.  Channels documented without a rate run at 1 Hz.
UNSPECIFIED_RATE_HZ = 1.0

TOPICS: dict[str, TopicSpec] = {
    t.name: t
    for t in (
        _out("battery/health", "UInt8", UINT8, 1.0),
        _out("battery/percentage", "UInt8", UINT8, 30.0),
        _out("battery/voltage", "Float32", FLOAT32, 1.0),
        _out("camera/awb_b_gain", "Float32", FLOAT32, 30.0),
        _out("camera/awb_r_gain", "Float32", FLOAT32, 30.0),
        _out("camera/camera_info", "CameraInfo", CAMERA_INFO, 30.0),
        _out("camera/exposure_time", "Float32", FLOAT32, 30.0),
        _out("camera/hfov", "Float32", FLOAT32, 30.0),
        _out("camera/image", "Image", IMAGE, 30.0),
        _out("camera/iso_gain", "UInt16", UINT16, 30.0),
        _out("camera/vfov", "Float32", FLOAT32, 30.0),
        _out("camera/zoom", "Float32", FLOAT32, 5.0),
        _out("drone/altitude", "Float32", FLOAT32, 30.0),
        _out("drone/altitude_above_to", "Float32", FLOAT32, 5.0),
        _out("drone/attitude", "QuaternionStamped", QUATERNION, 30.0),
        _out("drone/gps/fix", "Bool", BOOL, 1.0),
        _out("drone/gps/location", "NavSatFix", NAVSATFIX, 1.0),
        _out("drone/gps/satellites", "UInt8", UINT8, UNSPECIFIED_RATE_HZ),
        _out("drone/rpy", "Vector3Stamped", VECTOR3, 30.0),
        _out("drone/speed", "Vector3Stamped", VECTOR3, 30.0),
        _out("drone/state", "String", STRING, 30.0),
        _out("gimbal/attitude/absolute", "QuaternionStamped", QUATERNION, 5.0),
        _out("home/location", "Location", LOCATION_MSG, UNSPECIFIED_RATE_HZ),
        _out("link/quality", "UInt8", UINT8, 30.0),
        _out("skycontroller/attitude", "QuaternionStamped", QUATERNION, 20.0),
        TopicSpec("skycontroller/command", "SkycontrollerCommand",
                  SKYCONTROLLER_COMMAND, 100.0, "both"),
        _out("skycontroller/rpy", "Vector3Stamped", VECTOR3, 20.0),
        _out("storage/available", "UInt64", UINT64, UNSPECIFIED_RATE_HZ),
        _out("time", "Time", TIME, 30.0),
        # plumbing: media payload stream for storage/download
        TopicSpec("storage/media", "MediaChunk", MEDIA_CHUNK, None, "out",
                  SOURCE_PLUMBING),
    )
}

COMMAND_TOPICS: dict[str, TopicSpec] = {
    t.name: t
    for t in (
        _in("camera/command", "CameraCommand", CAMERA_COMMAND),
        _in("drone/command", "PilotingCommand", PILOTING_COMMAND),
        _in("drone/moveby", "MoveByCommand", MOVEBY_COMMAND),
        _in("drone/moveto", "MoveToCommand", MOVETO_COMMAND),
        _in("gimbal/command", "GimbalCommand", GIMBAL_COMMAND),
    )
}


def _svc(name, type_name, request, reply, source=SOURCE_API) -> ServiceSpec:
    return ServiceSpec(name, type_name, request, reply, source)


SERVICES: dict[str, ServiceSpec] = {
    s.name: s
    for s in (
        _svc("camera/photo/stop", "Photo", PHOTO_REQUEST, PHOTO_REPLY),
        _svc("camera/photo/take", "Photo", PHOTO_REQUEST, PHOTO_REPLY),
        _svc("camera/recording/start", "Recording", RECORDING_REQUEST,
             RECORDING_REPLY),
        _svc("camera/recording/stop", "Recording", RECORDING_REQUEST,
             RECORDING_REPLY),
        _svc("camera/reset", "Trigger", EMPTY, REPLY),
        _svc("drone/arm", "SetBool", SETBOOL_REQUEST, REPLY),
        _svc("drone/calibrate", "Trigger", EMPTY, REPLY),
        _svc("drone/emergency", "Trigger", EMPTY, REPLY),
        _svc("drone/halt", "Trigger", EMPTY, REPLY),
        _svc("drone/land", "Trigger", EMPTY, REPLY),
        _svc("drone/poi", "PilotedPOI", POI_REQUEST, REPLY, SOURCE_PLUMBING),
        _svc("drone/reboot", "Trigger", EMPTY, REPLY),
        _svc("drone/rth", "Trigger", EMPTY, REPLY),
        _svc("drone/takeoff", "Trigger", EMPTY, REPLY),
        _svc("flightplan/pause", "Trigger", EMPTY, REPLY),
        _svc("flightplan/start", "FlightPlan", FLIGHTPLAN_REQUEST,
             FLIGHTPLAN_REPLY),
        _svc("flightplan/stop", "Trigger", EMPTY, REPLY),
        _svc("flightplan/upload", "FlightPlan", FLIGHTPLAN_REQUEST,
             FLIGHTPLAN_REPLY),
        _svc("gimbal/calibrate", "Trigger", EMPTY, REPLY),
        _svc("gimbal/reset", "Trigger", EMPTY, REPLY),
        _svc("home/navigate", "SetBool", SETBOOL_REQUEST, REPLY),
        _svc("home/set", "Location", LOCATION_REQUEST, REPLY),
        _svc("skycontroller/offboard", "SetBool", SETBOOL_REQUEST, REPLY),
        _svc("storage/download", "SetBool", SETBOOL_REQUEST, REPLY),
        _svc("storage/format", "Trigger", EMPTY, REPLY),
        _svc("connection/hello", "Hello", HELLO_REQUEST, HELLO_REPLY,
             SOURCE_PLUMBING),
        _svc("fleet/info", "Trigger", EMPTY, FLEET_INFO_REPLY, SOURCE_PLUMBING),
        _svc("sim/advance", "SimAdvance", ADVANCE_REQUEST, ADVANCE_REPLY,
             SOURCE_PLUMBING),
    )
}

PARAMETERS = PARAM_NAMES  # every parameter channel, sorted


def api_topic_names() -> tuple[str, ...]:
    return tuple(sorted(
        n for n, t in TOPICS.items()
        if t.source == SOURCE_API and t.direction in ("out", "both")
    ))


def api_command_topic_names() -> tuple[str, ...]:
    return tuple(sorted(COMMAND_TOPICS))


def api_service_names() -> tuple[str, ...]:
    return tuple(sorted(
        n for n, s in SERVICES.items() if s.source == SOURCE_API
    ))


def all_channels() -> set[str]:
    return (
        set(TOPICS) | set(COMMAND_TOPICS) | set(SERVICES) | set(PARAMETERS)
    )


_CHANNELS = None


def _channels() -> set[str]:
    global _CHANNELS
    if _CHANNELS is None:
        _CHANNELS = all_channels()
    return _CHANNELS


# --------------------------------------------------------------------------
# envelope validation and codec


def _payload_schema(kind: str, channel: str, payload: dict) -> Optional[Schema]:
    """Schema to validate this payload with, or None for ERR on a raw channel."""
    if kind == "PUB":
        spec = TOPICS.get(channel) or COMMAND_TOPICS.get(channel)
        if spec is None:
            raise ProtocolError("unknown topic %r" % channel)
        return spec.schema
    if kind in ("SUB", "UNSUB"):
        spec = TOPICS.get(channel)
        if spec is None:
            raise ProtocolError("cannot subscribe to %r" % channel)
        return EMPTY
    if kind == "REQ":
        spec = SERVICES.get(channel)
        if spec is None:
            raise ProtocolError("unknown service %r" % channel)
        return spec.request
    if kind == "REP":
        spec = SERVICES.get(channel)
        if spec is not None:
            return spec.reply
        if channel in TOPICS:  # subscription ack
            return REPLY
        raise ProtocolError("unknown reply channel %r" % channel)
    if kind in ("PARAM_SET", "PARAM_VAL"):
        if channel not in PARAM_SPECS:
            raise ProtocolError("unknown parameter %r" % channel)
        return None  # checked by _check_param_value
    if kind == "PARAM_GET":
        if channel not in PARAM_SPECS:
            raise ProtocolError("unknown parameter %r" % channel)
        return EMPTY
    if kind == "ERR":
        return ERROR_PAYLOAD
    raise ProtocolError("unknown kind %r" % kind)


def _check_param_value(channel: str, payload: dict) -> None:
    if set(payload) != {"value"}:
        raise ProtocolError("parameter payload must be exactly {'value': ...}")
    value = payload["value"]
    if not isinstance(value, (bool, int, float, str)):
        raise ProtocolError("parameter value must be a scalar")
    if isinstance(value, float) and (value != value or value in
                                     (float("inf"), float("-inf"))):
        raise ProtocolError("parameter value must be finite")


def validate_envelope(env: Envelope) -> None:
    if env.kind not in KINDS:
        raise ProtocolError("unknown kind %r" % env.kind)
    if not isinstance(env.channel, str) or len(env.channel) > 256:
        raise ProtocolError("bad channel")
    if not isinstance(env.seq, int) or isinstance(env.seq, bool) \
            or not 0 <= env.seq < MAX_SEQ:
        raise ProtocolError("seq out of range")
    if not isinstance(env.stamp, int) or isinstance(env.stamp, bool) \
            or not 0 <= env.stamp < MAX_STAMP:
        raise ProtocolError("stamp out of range")
    if not isinstance(env.payload, dict):
        raise ProtocolError("payload must be an object")
    if env.kind != "ERR" and env.channel not in _channels():
        raise ProtocolError("unknown channel %r" % env.channel)
    schema = _payload_schema(env.kind, env.channel, env.payload)
    if schema is None:
        _check_param_value(env.channel, env.payload)
    else:
        validate_payload(schema, env.payload)


def encode(env: Envelope, validate: bool = True) -> bytes:
    """Serialize an envelope to its JSON body (no frame header)."""
    if validate:
        validate_envelope(env)
    body = json.dumps(
        {
            "kind": env.kind,
            "channel": env.channel,
            "seq": env.seq,
            "stamp": env.stamp,
            "payload": env.payload,
        },
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")
    if len(body) > MAX_BODY:
        raise ProtocolError("frame body exceeds %d bytes" % MAX_BODY)
    return body


def encode_frame(env: Envelope, validate: bool = True) -> bytes:
    body = encode(env, validate)
    return HEADER.pack(len(body)) + body


def _reject_constant(name: str):
    raise ProtocolError("non-finite JSON constant %s" % name)


def decode(body: Union[bytes, bytearray, memoryview],
           validate: bool = True) -> Envelope:
    """Parse one frame body into an Envelope.  Raises ProtocolError."""
    try:
        text = bytes(body).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolError("body is not UTF-8: %s" % exc) from None
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ProtocolError("body is not JSON: %s" % exc) from None
    if not isinstance(obj, dict):
        raise ProtocolError("body must be a JSON object")
    expected = {"kind", "channel", "seq", "stamp", "payload"}
    if set(obj) != expected:
        raise ProtocolError(
            "body keys must be exactly %s" % sorted(expected)
        )
    env = Envelope(obj["kind"], obj["channel"], obj["seq"], obj["stamp"],
                   obj["payload"])
    if not isinstance(env.payload, dict):
        raise ProtocolError("payload must be an object")
    if validate:
        validate_envelope(env)
    return env


class FrameDecoder:
    """Incremental frame splitter for a byte stream.

    feed() returns a list of Envelope or ProtocolError entries, one per
    completed frame; a FramingError is raised when the stream itself is
    unusable (oversized length prefix).
    """

    def __init__(self, validate: bool = True):
        self._buf = bytearray()
        self._validate = validate

    def feed(self, data: bytes) -> list[Union[Envelope, ProtocolError]]:
        self._buf.extend(data)
        out: list[Union[Envelope, ProtocolError]] = []
        while True:
            if len(self._buf) < HEADER.size:
                return out
            (length,) = HEADER.unpack_from(self._buf)
            if length > MAX_BODY:
                raise FramingError("frame length %d exceeds cap" % length)
            if len(self._buf) < HEADER.size + length:
                return out
            body = bytes(self._buf[HEADER.size:HEADER.size + length])
            del self._buf[:HEADER.size + length]
            try:
                out.append(decode(body, validate=self._validate))
            except FramingError:
                raise
            except ProtocolError as exc:
                out.append(exc)

    def pending(self) -> int:
        return len(self._buf)


def decode_stream(data: bytes) -> list[Union[Envelope, ProtocolError]]:
    """Split and decode a complete byte buffer (for tests and tools)."""
    return FrameDecoder().feed(data)


def error_envelope(seq: int, channel: str, message: str,
                   stamp: int = 0) -> Envelope:
    return Envelope("ERR", channel, seq, stamp, {"error": message})
