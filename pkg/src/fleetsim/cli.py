"""Ground-station command line.

Talks to a running daemon: discovery through the fleet port, everything
else over the addressed drone's own port.  Exits nonzero with a plain
message on any protocol or timeout failure.
"""

from __future__ import annotations

import argparse
import base64
import os
import sys

from .client import (ClientError, DroneHandle, fleet_info)
from .config import DEFAULT_BASE_PORT
from .experiments import ExperimentError, resolve_spec, run_experiment
from .params import PARAM_SPECS
from .teleop import run_teleop

DEFAULT_HOST = "127.0.0.1"
DEFAULT_FLEET_PORT = DEFAULT_BASE_PORT - 1

FLY_ACTIONS = {
    "takeoff": "drone/takeoff",
    "land": "drone/land",
    "rth": "drone/rth",
    "halt": "drone/halt",
    "emergency": "drone/emergency",
}

MEDIA_SUFFIX = {"photo": ".jpg", "video": ".mp4"}


class CliError(Exception):
    pass


def _drone_port(args) -> int:
    if getattr(args, "port", None):
        return args.port
    info = fleet_info(args.host, args.fleet_port)
    drones = info["drones"]
    name = getattr(args, "drone", None)
    if name is None:
        if not drones:
            raise CliError("fleet is empty")
        return drones[0]["port"]
    for entry in drones:
        if entry["name"] == name:
            return entry["port"]
    raise CliError("no drone named %r; have %s"
                   % (name, ", ".join(d["name"] for d in drones)))


def _open(args) -> DroneHandle:
    handle = DroneHandle.connect(args.host, _drone_port(args))
    handle.hello()
    return handle


def cmd_list(args) -> int:
    info = fleet_info(args.host, args.fleet_port)
    drones = info["drones"]
    if not drones:
        print("no drones")
        return 0
    width = max(len(d["name"]) for d in drones)
    for entry in drones:
        print("%-*s  %-4s  port %d"
              % (width, entry["name"], entry["model"], entry["port"]))
    return 0


def cmd_fly(args) -> int:
    with _open(args) as handle:
        reply = handle.call(FLY_ACTIONS[args.action])
    print(reply.get("message", ""))
    return 0 if reply.get("success") else 1


def cmd_move(args) -> int:
    with _open(args) as handle:
        if args.by is not None:
            dx, dy, dz, dyaw = args.by
            handle.publish("drone/moveby",
                           {"dx": dx, "dy": dy, "dz": dz, "dyaw": dyaw})
            print("moveby sent: %.1f %.1f %.1f m, %.0f deg" % (dx, dy, dz,
                                                               dyaw))
        else:
            lat, lon, alt, heading = args.to
            handle.publish("drone/moveto", {
                "latitude": lat, "longitude": lon, "altitude": alt,
                "heading": heading,
                "orientation_mode": args.orientation_mode,
            })
            print("moveto sent: %.6f %.6f alt %.1f heading %.0f"
                  % (lat, lon, alt, heading))
    return 0


def _coerce_param(name: str, text: str):
    spec = PARAM_SPECS.get(name)
    if spec is None:
        raise CliError("unknown parameter %r" % name)
    if spec.kind == "bool":
        low = text.lower()
        if low in ("true", "1", "on", "yes"):
            return True
        if low in ("false", "0", "off", "no"):
            return False
        raise CliError("expected a boolean for %s" % name)
    if spec.kind == "int":
        return int(text)
    if spec.kind == "float":
        return float(text)
    return text


def cmd_param(args) -> int:
    with _open(args) as handle:
        if args.action == "get":
            value = handle.param_get(args.name)
        else:
            value = handle.param_set(args.name,
                                     _coerce_param(args.name, args.value))
    print(value)
    return 0


def cmd_media(args) -> int:
    with _open(args) as handle:
        folder = args.out
        if folder is None:
            folder = str(handle.param_get("storage/download_folder"))
        folder = os.path.expanduser(folder)
        reply, chunks = handle.download_media(delete=args.delete)
    if not reply.get("success"):
        print(reply.get("message", "download failed"), file=sys.stderr)
        return 1
    os.makedirs(folder, exist_ok=True)
    for chunk in chunks:
        suffix = MEDIA_SUFFIX.get(chunk["kind"], ".bin")
        path = os.path.join(folder, chunk["media_id"] + suffix)
        with open(path, "wb") as fh:
            fh.write(base64.b64decode(chunk["data"]))
        print(path)
    print("%d file(s), %s" % (len(chunks), reply.get("message", "")))
    return 0


def cmd_experiment(args) -> int:
    spec = resolve_spec(args.spec)
    with _open(args) as handle:
        csv_text = run_experiment(handle, spec)
    if args.out == "-":
        sys.stdout.write(csv_text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print("wrote %s (%d rows)" % (args.out,
                                      csv_text.count("\n") - 1))
    return 0


def cmd_teleop(args) -> int:
    with _open(args) as handle:
        run_teleop(handle)
    return 0


def _add_target(parser, drone: str = "positional") -> None:
    parser.add_argument("--host", default=DEFAULT_HOST)
    parser.add_argument("--fleet-port", type=int, default=DEFAULT_FLEET_PORT,
                        help="discovery port (drone ports start one above)")
    parser.add_argument("--port", type=int,
                        help="drone port, skipping name discovery")
    if drone == "positional":
        parser.add_argument("drone", help="drone name")
    elif drone == "flag":
        parser.add_argument("--drone",
                            help="drone name (default: first in fleet)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcs",
                                     description="fleet ground station")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="show fleet drones")
    _add_target(p, drone="none")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("fly", help="basic flight services")
    _add_target(p)
    p.add_argument("action", choices=sorted(FLY_ACTIONS))
    p.set_defaults(func=cmd_fly)

    p = sub.add_parser("move", help="relative or absolute move")
    _add_target(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--by", nargs=4, type=float,
                       metavar=("DX", "DY", "DZ", "DYAW"),
                       help="body-frame displacement (m, m, m, deg)")
    group.add_argument("--to", nargs=4, type=float,
                       metavar=("LAT", "LON", "ALT", "HEADING"),
                       help="world target (deg, deg, m, deg)")
    p.add_argument("--orientation-mode", type=int, default=3,
                   choices=(0, 1, 2, 3),
                   help="0 keep, 1 face target, 2 heading first, "
                        "3 heading during")
    p.set_defaults(func=cmd_move)

    p = sub.add_parser("param", help="read or write a parameter")
    p.add_argument("action", choices=("get", "set"))
    p.add_argument("name")
    p.add_argument("value", nargs="?")
    _add_target(p, drone="flag")
    p.set_defaults(func=cmd_param)

    p = sub.add_parser("media", help="download stored media")
    p.add_argument("action", choices=("download",))
    _add_target(p, drone="flag")
    p.add_argument("--delete", action="store_true",
                   help="remove media from the drone after download")
    p.add_argument("--out", help="destination folder "
                                 "(default: drone's download_folder)")
    p.set_defaults(func=cmd_media)

    p = sub.add_parser("experiment", help="run a step-response experiment")
    p.add_argument("spec", help="builtin name or YAML spec file")
    _add_target(p, drone="flag")
    p.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("teleop", help="keyboard piloting console")
    _add_target(p)
    p.set_defaults(func=cmd_teleop)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "param" and args.action == "set" \
            and args.value is None:
        parser.error("param set needs a value")
    try:
        return args.func(args)
    except (ClientError, ExperimentError, CliError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
