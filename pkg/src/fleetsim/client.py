"""Ground-station client SDK.

Synchronous, thread-backed handle to one simulated drone: a reader thread
decodes frames and dispatches them, callers block on replies.  Suits both
wall-paced daemons and gated ones (where sim/advance moves the clock).
"""

from __future__ import annotations

import socket
import threading
from typing import Any, Callable, Optional

from . import protocol
from .protocol import Envelope, FrameDecoder, FramingError, ProtocolError

DEFAULT_TIMEOUT = 2.0
ADVANCE_TIMEOUT = 60.0
CONNECT_TIMEOUT = 5.0


class ClientError(Exception):
    """Base class for SDK failures."""


class CallTimeout(ClientError):
    """No reply arrived within the deadline."""


class CallError(ClientError):
    """The daemon answered with an ERR envelope."""


class ConnectionClosed(ClientError):
    """The socket dropped while a caller was waiting."""


class _Pending:
    __slots__ = ("event", "kind", "payload")

    def __init__(self):
        self.event = threading.Event()
        self.kind = ""
        self.payload: Optional[dict] = None


class DroneHandle:
    """One TCP connection to a drone port (or the fleet port)."""

    def __init__(self, sock: socket.socket, address: tuple[str, int]):
        self.address = address
        self._sock = sock
        self._send_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._seq = 0
        self._pending: dict[int, _Pending] = {}
        self._latest: dict[str, tuple[dict, int]] = {}
        self._callbacks: dict[str, list[Callable[[dict, int], None]]] = {}
        self._media_sink: Optional[list] = None
        self._errors: list[dict] = []
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True,
                                        name="drone-reader")
        self._reader.start()
        self.name = ""
        self.model = ""

    # -- connection ---------------------------------------------------------

    @classmethod
    def connect(cls, host: str, port: int,
                timeout: float = CONNECT_TIMEOUT) -> "DroneHandle":
        sock = socket.create_connection((host, port), timeout=timeout)
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock, (host, port))

    def hello(self, client: str = "gcs",
              timeout: float = DEFAULT_TIMEOUT) -> dict:
        reply = self.call("connection/hello", {"client": client},
                          timeout=timeout)
        self.name = reply.get("name", "")
        self.model = reply.get("model", "")
        return reply

    def close(self) -> None:
        with self._state_lock:
            if self._closed:
                return
            self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
        self._reader.join(timeout=2.0)
        self._fail_pending()

    def __enter__(self) -> "DroneHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- core send/receive --------------------------------------------------

    def _next_seq(self) -> int:
        with self._state_lock:
            self._seq += 1
            return self._seq

    def _send(self, env: Envelope) -> None:
        frame = protocol.encode_frame(env)
        with self._send_lock:
            if self._closed:
                raise ConnectionClosed("handle is closed")
            try:
                self._sock.sendall(frame)
            except OSError as exc:
                raise ConnectionClosed(str(exc)) from exc

    def _round_trip(self, kind: str, channel: str, payload: dict,
                    timeout: float) -> tuple[str, dict]:
        seq = self._next_seq()
        pending = _Pending()
        with self._state_lock:
            self._pending[seq] = pending
        try:
            self._send(Envelope(kind, channel, seq, 0, payload))
            if not pending.event.wait(timeout):
                raise CallTimeout("%s %s: no reply within %.1f s"
                                  % (kind, channel, timeout))
        finally:
            with self._state_lock:
                self._pending.pop(seq, None)
        if pending.kind == "":
            raise ConnectionClosed("connection dropped during %s" % channel)
        if pending.kind == "ERR":
            raise CallError(pending.payload.get("error", "unknown error"))
        return pending.kind, pending.payload

    def _fail_pending(self) -> None:
        with self._state_lock:
            pending = list(self._pending.values())
            self._pending.clear()
        for p in pending:
            p.event.set()

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        try:
            while True:
                data = self._sock.recv(65536)
                if not data:
                    break
                for item in decoder.feed(data):
                    if isinstance(item, ProtocolError):
                        continue
                    self._dispatch(item)
        except (OSError, FramingError):
            pass
        finally:
            with self._state_lock:
                self._closed = True
            self._fail_pending()

    def _dispatch(self, env: Envelope) -> None:
        if env.kind == "PUB":
            if env.channel == "storage/media":
                with self._state_lock:
                    sink = self._media_sink
                if sink is not None:
                    sink.append(env.payload)
                    return
            with self._state_lock:
                self._latest[env.channel] = (env.payload, env.stamp)
                callbacks = list(self._callbacks.get(env.channel, ()))
            for cb in callbacks:
                cb(env.payload, env.stamp)
            return
        with self._state_lock:
            pending = self._pending.get(env.seq)
        if pending is not None:
            pending.kind = env.kind
            pending.payload = env.payload
            pending.event.set()
        elif env.kind == "ERR":
            with self._state_lock:
                self._errors.append(env.payload)

    # -- public API ---------------------------------------------------------

    def call(self, service: str, payload: Optional[dict] = None,
             timeout: float = DEFAULT_TIMEOUT) -> dict:
        """REQ/REP round trip; returns the reply payload."""
        kind, data = self._round_trip("REQ", service, payload or {}, timeout)
        if kind != "REP":
            raise CallError("unexpected %s reply on %s" % (kind, service))
        return data

    def publish(self, channel: str, payload: dict) -> None:
        """Fire-and-forget command publish (piloting, gimbal, camera)."""
        self._send(Envelope("PUB", channel, self._next_seq(), 0, payload))

    def subscribe(self, topic: str,
                  callback: Optional[Callable[[dict, int], None]] = None,
                  timeout: float = DEFAULT_TIMEOUT) -> None:
        if callback is not None:
            with self._state_lock:
                self._callbacks.setdefault(topic, []).append(callback)
        self._round_trip("SUB", topic, {}, timeout)

    def unsubscribe(self, topic: str,
                    timeout: float = DEFAULT_TIMEOUT) -> None:
        with self._state_lock:
            self._callbacks.pop(topic, None)
        self._round_trip("UNSUB", topic, {}, timeout)

    def latest(self, topic: str) -> Optional[tuple[dict, int]]:
        """Most recent (payload, stamp) seen on a subscribed topic."""
        with self._state_lock:
            return self._latest.get(topic)

    def param_get(self, name: str, timeout: float = DEFAULT_TIMEOUT) -> Any:
        kind, data = self._round_trip("PARAM_GET", name, {}, timeout)
        return data["value"]

    def param_set(self, name: str, value: Any,
                  timeout: float = DEFAULT_TIMEOUT) -> Any:
        kind, data = self._round_trip("PARAM_SET", name, {"value": value},
                                      timeout)
        return data["value"]

    def advance(self, until: float,
                timeout: float = ADVANCE_TIMEOUT) -> float:
        """Let simulated time run to `until` seconds; returns the sim time."""
        reply = self.call("sim/advance", {"until": float(until)},
                          timeout=timeout)
        return float(reply["time"])

    def sim_time(self, timeout: float = DEFAULT_TIMEOUT) -> float:
        """Current simulated time (an advance to 0 never moves the clock)."""
        reply = self.call("sim/advance", {"until": 0.0}, timeout=timeout)
        return float(reply["time"])

    def wait_state(self, targets, timeout_s: float = 20.0,
                   poll: float = 0.1) -> str:
        """Advance (or wait) until drone/state reaches one of `targets`.

        Requires a drone/state subscription.  Works against both gated and
        wall-paced daemons: gated ones move because of the advance calls,
        paced ones move on their own.
        """
        if isinstance(targets, str):
            targets = (targets,)
        deadline = self.sim_time() + timeout_s
        while True:
            seen = self.latest("drone/state")
            if seen is not None and seen[0]["data"] in targets:
                return seen[0]["data"]
            now = self.sim_time()
            if now >= deadline:
                raise CallTimeout("state did not reach %s within %.1f s sim"
                                  % (targets, timeout_s))
            self.advance(min(deadline, now + poll))

    def download_media(self, delete: bool = False,
                       timeout: float = ADVANCE_TIMEOUT
                       ) -> tuple[dict, list[dict]]:
        """Fetch all stored media; returns (reply, chunk payloads)."""
        chunks: list[dict] = []
        with self._state_lock:
            self._media_sink = chunks
        try:
            reply = self.call("storage/download", {"data": delete},
                              timeout=timeout)
        finally:
            with self._state_lock:
                self._media_sink = None
        return reply, chunks

    def drain_errors(self) -> list[dict]:
        """ERR envelopes that matched no pending call (async warnings)."""
        with self._state_lock:
            errors = self._errors
            self._errors = []
        return errors


def fleet_info(host: str, fleet_port: int,
               timeout: float = DEFAULT_TIMEOUT) -> dict:
    """Ask a fleet port which drones exist and where."""
    handle = DroneHandle.connect(host, fleet_port)
    try:
        return handle.call("fleet/info", {}, timeout=timeout)
    finally:
        handle.close()
