"""Keyboard teleoperation console.

Publishes stick frames (skycontroller/command) at 20 Hz while rendering a
small curses status panel.  Terminals report key repeats rather than
press/release pairs, so each key arms its axis for a short hold window;
when the window lapses without a repeat the axis snaps back to zero and the
drone brakes to a hover.  Buttons (takeoff/land, halt) go through services
directly for crisp feedback.
"""

from __future__ import annotations

import curses
import time

from .client import CallError, CallTimeout, DroneHandle

PUBLISH_RATE_HZ = 20.0
KEY_HOLD_S = 0.5  # terminal key-repeat gap tolerance
AXIS_STEP = 100  # full deflection; tap-and-hold flying favors clarity

STATUS_TOPICS = ("drone/state", "drone/altitude", "drone/speed",
                 "battery/percentage", "link/quality")

HELP_LINES = (
    "w/s: forward/back    a/d: left/right",
    "up/down: climb/sink  left/right: turn",
    "g/h: gimbal up/down  t: takeoff  l: land",
    "space: halt          q: quit",
)

# key -> (axis, sign)
AXIS_KEYS = {
    ord("w"): ("x", 1), ord("s"): ("x", -1),
    ord("d"): ("y", 1), ord("a"): ("y", -1),
    curses.KEY_UP: ("z", 1), curses.KEY_DOWN: ("z", -1),
    curses.KEY_LEFT: ("yaw", 1), curses.KEY_RIGHT: ("yaw", -1),
    ord("g"): ("camera", 1), ord("h"): ("camera", -1),
}

ZERO_AXES = {"x": 0, "y": 0, "z": 0, "yaw": 0, "camera": 0, "zoom": 0}


def _stick_payload(axes: dict) -> dict:
    payload = dict(axes)
    payload.update(return_home=False, takeoff_land=False,
                   reset_camera=False, reset_zoom=False)
    return payload


class TeleopSession:
    def __init__(self, handle: DroneHandle):
        self.handle = handle
        self.pressed: dict[str, tuple[int, float]] = {}  # axis -> (value, t)
        self.message = ""

    def axes_now(self, now: float) -> dict:
        axes = dict(ZERO_AXES)
        for axis, (value, stamp) in list(self.pressed.items()):
            if now - stamp > KEY_HOLD_S:
                del self.pressed[axis]
            else:
                axes[axis] = value
        return axes

    def press(self, axis: str, sign: int, now: float) -> None:
        self.pressed[axis] = (sign * AXIS_STEP, now)

    def service(self, name: str) -> None:
        try:
            reply = self.handle.call(name)
            self.message = "%s: %s" % (name, reply.get("message", ""))
        except (CallError, CallTimeout) as exc:
            self.message = "%s failed: %s" % (name, exc)


def _fmt_latest(handle: DroneHandle, topic: str, fmt, default="-") -> str:
    seen = handle.latest(topic)
    if seen is None:
        return default
    try:
        return fmt(seen[0])
    except (KeyError, TypeError):
        return default


def _render(screen, session: TeleopSession, axes: dict) -> None:
    handle = session.handle
    screen.erase()
    screen.addstr(0, 0, "teleop: %s (%s)" % (handle.name, handle.model),
                  curses.A_BOLD)
    screen.addstr(1, 0, "state %s  alt %s m  battery %s%%  link %s/5" % (
        _fmt_latest(handle, "drone/state", lambda p: p["data"]),
        _fmt_latest(handle, "drone/altitude", lambda p: "%.1f" % p["data"]),
        _fmt_latest(handle, "battery/percentage", lambda p: p["data"]),
        _fmt_latest(handle, "link/quality", lambda p: p["data"]),
    ))
    screen.addstr(2, 0, "speed %s m/s" % _fmt_latest(
        handle, "drone/speed",
        lambda p: "%.1f/%.1f/%.1f" % (p["x"], p["y"], p["z"])))
    screen.addstr(3, 0, "axes x%+4d y%+4d z%+4d yaw%+4d cam%+4d" % (
        axes["x"], axes["y"], axes["z"], axes["yaw"], axes["camera"]))
    for i, line in enumerate(HELP_LINES):
        screen.addstr(5 + i, 0, line)
    if session.message:
        screen.addstr(10, 0, session.message[: max(10, curses.COLS - 1)])
    screen.refresh()


def _loop(screen, handle: DroneHandle) -> None:
    curses.curs_set(0)
    screen.nodelay(True)
    screen.keypad(True)
    session = TeleopSession(handle)
    period = 1.0 / PUBLISH_RATE_HZ
    next_frame = time.monotonic()
    while True:
        now = time.monotonic()
        while True:
            key = screen.getch()
            if key == -1:
                break
            if key in (ord("q"), 27):
                handle.publish("skycontroller/command",
                               _stick_payload(dict(ZERO_AXES)))
                return
            if key in AXIS_KEYS:
                axis, sign = AXIS_KEYS[key]
                session.press(axis, sign, now)
            elif key == ord("t"):
                session.service("drone/takeoff")
            elif key == ord("l"):
                session.service("drone/land")
            elif key == ord(" "):
                session.service("drone/halt")
        axes = session.axes_now(now)
        handle.publish("skycontroller/command", _stick_payload(axes))
        _render(screen, session, axes)
        next_frame += period
        delay = next_frame - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        else:
            next_frame = time.monotonic()


def run_teleop(handle: DroneHandle) -> None:
    """Take over the terminal until the pilot quits."""
    for topic in STATUS_TOPICS:
        handle.subscribe(topic)
    curses.wrapper(_loop, handle)
