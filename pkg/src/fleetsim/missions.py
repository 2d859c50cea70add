"""Waypoint plan files.

A plan is plain text: the header line "QGC WPL 110" followed by one line
per waypoint with tab-separated fields

    index	latitude	longitude	altitude	heading

where latitude/longitude are degrees, altitude is meters above the ground
reference and heading is degrees counter-clockwise from north.  Blank
lines and lines starting with '#' are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

PLAN_HEADER = "QGC WPL 110"


class PlanError(ValueError):
    """The plan text is malformed."""


@dataclass(frozen=True)
class Waypoint:
    index: int
    latitude: float
    longitude: float
    altitude: float
    heading: float


def parse_plan(text: str) -> list[Waypoint]:
    lines = text.splitlines()
    body: list[tuple[int, str]] = []
    header_seen = False
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != PLAN_HEADER:
                raise PlanError(
                    "line %d: expected header %r, got %r"
                    % (number, PLAN_HEADER, line)
                )
            header_seen = True
            continue
        body.append((number, raw))
    if not header_seen:
        raise PlanError("empty plan, missing %r header" % PLAN_HEADER)
    if not body:
        raise PlanError("plan has no waypoints")

    waypoints: list[Waypoint] = []
    for number, raw in body:
        fields = raw.strip().split("\t")
        if len(fields) != 5:
            raise PlanError(
                "line %d: expected 5 tab-separated fields, got %d"
                % (number, len(fields))
            )
        try:
            index = int(fields[0])
            lat = float(fields[1])
            lon = float(fields[2])
            alt = float(fields[3])
            heading = float(fields[4])
        except ValueError as exc:
            raise PlanError("line %d: %s" % (number, exc)) from None
        if not -90.0 <= lat <= 90.0:
            raise PlanError("line %d: latitude %r out of range" % (number, lat))
        if not -180.0 <= lon <= 180.0:
            raise PlanError("line %d: longitude %r out of range" % (number, lon))
        if index != len(waypoints):
            raise PlanError(
                "line %d: waypoint index %d out of order, expected %d"
                % (number, index, len(waypoints))
            )
        waypoints.append(Waypoint(index, lat, lon, alt, heading))
    return waypoints


def format_plan(waypoints: list[Waypoint]) -> str:
    lines = [PLAN_HEADER]
    for wp in waypoints:
        lines.append("%d\t%.7f\t%.7f\t%.2f\t%.2f"
                     % (wp.index, wp.latitude, wp.longitude, wp.altitude,
                        wp.heading))
    return "\n".join(lines) + "\n"
