"""Fleet simulation daemon.

One asyncio process serves a fleet of simulated drones.  Each drone owns a
TCP port speaking the length-prefixed envelope protocol; a fleet port
(base_port - 1) answers fleet/info; an optional WebSocket port bridges the
same envelopes to browsers with channels prefixed by drone name.

Sessions never block the simulation: each connection has a single ordered
writer queue, and per-topic backlogs drop oldest beyond a fixed depth.
Simulated time advances either wall-paced (realtime_factor > 0) or gated
(realtime_factor 0), where time only moves while a client holds an open
sim/advance request.
"""

from __future__ import annotations

import argparse
import asyncio
import itertools
import logging
import math
import signal
from collections import deque
from dataclasses import dataclass
from typing import Any, Optional

from . import protocol, ws
from .config import ConfigError, FleetConfig, load_config
from .protocol import Envelope, FrameDecoder, FramingError, ProtocolError
from .vehicle import Event, Request, Vehicle, VehicleConfig

log = logging.getLogger("simd")

TOPIC_QUEUE_DEPTH = 64  # queued-but-unsent frames per topic per session
READ_CHUNK = 65536
TICKS_PER_YIELD = 16  # gated mode: event-loop yield cadence
SCHED_EPS = 1e-9


@dataclass
class Token:
    """Links a vehicle event back to the requesting session."""
    session: "BaseSession"
    seq: int
    channel: str  # channel exactly as the client sent it (may be prefixed)


class _QueueItem:
    __slots__ = ("env", "topic", "dropped")

    def __init__(self, env: Envelope, topic: Optional[str] = None):
        self.env = env
        self.topic = topic
        self.dropped = False


class BaseSession:
    """One client connection: ordered writer queue plus envelope routing."""

    def __init__(self, daemon: "Daemon", writer: asyncio.StreamWriter,
                 label: str):
        self.daemon = daemon
        self.writer = writer
        self.label = label
        self.closed = False
        self._seq = itertools.count()
        self._queue: deque[_QueueItem] = deque()
        self._pending: dict[str, deque[_QueueItem]] = {}
        self._wake = asyncio.Event()
        self._writer_task: Optional[asyncio.Task] = None
        self.subscriptions: set[tuple["Actor", str]] = set()

    # -- outgoing ---------------------------------------------------------

    def start_writer(self) -> None:
        self._writer_task = asyncio.get_running_loop().create_task(
            self._write_loop())

    def pack(self, env: Envelope) -> bytes:
        return protocol.encode_frame(env, validate=False)

    def enqueue(self, kind: str, channel: str, payload: dict,
                seq: Optional[int] = None, stamp: int = 0) -> None:
        if self.closed:
            return
        env = Envelope(kind, channel,
                       next(self._seq) if seq is None else seq,
                       stamp, payload)
        self._queue.append(_QueueItem(env))
        self._wake.set()

    def enqueue_pub(self, channel: str, payload: dict, stamp: int) -> None:
        """Telemetry publish with per-topic drop-oldest backpressure."""
        if self.closed:
            return
        env = Envelope("PUB", channel, next(self._seq), stamp, payload)
        item = _QueueItem(env, topic=channel)
        backlog = self._pending.setdefault(channel, deque())
        if len(backlog) >= TOPIC_QUEUE_DEPTH:
            backlog.popleft().dropped = True
        backlog.append(item)
        self._queue.append(item)
        self._wake.set()

    def purge_topic(self, channel: str) -> None:
        backlog = self._pending.pop(channel, None)
        if backlog:
            for item in backlog:
                item.dropped = True

    async def _write_loop(self) -> None:
        try:
            while not self.closed:
                while self._queue:
                    item = self._queue.popleft()
                    if item.topic is not None:
                        backlog = self._pending.get(item.topic)
                        if backlog and backlog[0] is item:
                            backlog.popleft()
                    if item.dropped:
                        continue
                    self.writer.write(self.pack(item.env))
                await self.writer.drain()
                if self.closed:
                    return
                self._wake.clear()
                if self._queue:
                    continue
                await self._wake.wait()
        except (ConnectionError, asyncio.CancelledError, OSError):
            pass
        finally:
            self.close()

    # -- lifecycle --------------------------------------------------------

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        self._wake.set()
        for actor, topic in list(self.subscriptions):
            actor.unsubscribe(self, topic)
        self.subscriptions.clear()
        for actor in self.daemon.actors.values():
            actor.drop_session(self)
        try:
            self.writer.close()
        except Exception:
            pass

    # -- incoming ---------------------------------------------------------

    def resolve(self, channel: str) -> tuple[Optional["Actor"], str]:
        """Map a wire channel to (actor, registry channel)."""
        raise NotImplementedError

    def handle_envelope(self, env: Envelope) -> None:
        actor, channel = self.resolve(env.channel)
        if env.kind == "REQ" and channel == "fleet/info":
            self.enqueue("REP", env.channel, self.daemon.fleet_info(),
                         seq=env.seq)
            return
        if actor is None:
            self.enqueue("ERR", env.channel,
                         {"error": "unknown drone for channel %r"
                          % env.channel}, seq=env.seq)
            return
        token = Token(self, env.seq, env.channel)
        if env.kind == "SUB":
            actor.subscribe(self, channel)
            self.enqueue("REP", env.channel,
                         {"success": True, "message": "subscribed"},
                         seq=env.seq, stamp=actor.stamp())
        elif env.kind == "UNSUB":
            actor.unsubscribe(self, channel)
            self.purge_topic(env.channel)
            self.enqueue("REP", env.channel,
                         {"success": True, "message": "unsubscribed"},
                         seq=env.seq, stamp=actor.stamp())
        elif env.kind == "PUB":
            spec = protocol.TOPICS.get(channel)
            if spec is not None and spec.direction == "out":
                self.enqueue("ERR", env.channel,
                             {"error": "topic %r is read-only" % channel},
                             seq=env.seq)
                return
            actor.vehicle.submit(Request("command", channel, env.payload,
                                         token=token))
            actor.pump()
        elif env.kind == "REQ":
            if channel == "connection/hello":
                self.enqueue("REP", env.channel, actor.hello(), seq=env.seq,
                             stamp=actor.stamp())
            elif channel == "sim/advance":
                actor.grant(self, env.seq, env.channel,
                            float(env.payload["until"]))
            else:
                actor.vehicle.submit(Request("service", channel, env.payload,
                                             token=token))
                actor.pump()
        elif env.kind == "PARAM_SET":
            actor.vehicle.submit(Request("param_set", channel, env.payload,
                                         token=token))
            actor.pump()
        elif env.kind == "PARAM_GET":
            actor.vehicle.submit(Request("param_get", channel, env.payload,
                                         token=token))
            actor.pump()
        else:
            self.enqueue("ERR", env.channel,
                         {"error": "unexpected kind %r from client"
                          % env.kind}, seq=env.seq)

    def handle_error(self, error: ProtocolError) -> None:
        self.enqueue("ERR", "protocol", {"error": str(error)})


class DroneSession(BaseSession):
    """TCP connection bound to a single drone port."""

    def __init__(self, daemon, writer, actor: "Actor"):
        super().__init__(daemon, writer, "tcp:%s" % actor.name)
        self.actor = actor

    def resolve(self, channel: str):
        return self.actor, channel


class FleetSession(BaseSession):
    """TCP connection to the fleet port; only fleet/info is served."""

    def resolve(self, channel: str):
        return None, channel


class WsSession(BaseSession):
    """WebSocket connection; channels carry a 'drone-name/' prefix."""

    def pack(self, env: Envelope) -> bytes:
        return ws.text_frame(protocol.encode(env, validate=False))

    def resolve(self, channel: str):
        head, _, rest = channel.partition("/")
        actor = self.daemon.actors.get(head)
        if actor is not None and rest:
            return actor, rest
        return None, channel


class Actor:
    """One simulated drone plus its subscriber bookkeeping."""

    def __init__(self, daemon: "Daemon", vehicle: Vehicle):
        self.daemon = daemon
        self.vehicle = vehicle
        self.name = vehicle.name
        self.subscribers: dict[str, list[tuple[BaseSession, str]]] = {}
        self.next_due: dict[str, float] = {}
        self.grants: list[tuple[int, BaseSession, int, str]] = []

    def stamp(self) -> int:
        return self.vehicle.stamp_ns()

    def hello(self) -> dict:
        return {
            "success": True,
            "message": "hello from %s" % self.name,
            "name": self.name,
            "model": self.vehicle.model.name,
            "version": self.vehicle.config.version,
            "protocol": protocol.PROTOCOL_VERSION,
        }

    # -- subscriptions ----------------------------------------------------

    def subscribe(self, session: BaseSession, topic: str,
                  wire_channel: Optional[str] = None) -> None:
        wire = wire_channel
        if wire is None:
            wire = topic if isinstance(session, DroneSession) \
                else "%s/%s" % (self.name, topic)
        entries = self.subscribers.setdefault(topic, [])
        if any(s is session for s, _ in entries):
            return
        entries.append((session, wire))
        session.subscriptions.add((self, topic))
        spec = protocol.TOPICS.get(topic)
        periodic = (spec is not None and spec.direction != "in"
                    and spec.source == protocol.SOURCE_API)
        if periodic and topic not in self.next_due:
            rate = spec.rate_hz or protocol.UNSPECIFIED_RATE_HZ
            period = 1.0 / rate
            now = self.vehicle.sim_time
            self.next_due[topic] = (math.floor(now / period + SCHED_EPS) + 1) \
                * period

    def unsubscribe(self, session: BaseSession, topic: str) -> None:
        entries = self.subscribers.get(topic)
        if not entries:
            return
        entries[:] = [(s, w) for s, w in entries if s is not session]
        session.subscriptions.discard((self, topic))
        if not entries:
            del self.subscribers[topic]
            self.next_due.pop(topic, None)

    def drop_session(self, session: BaseSession) -> None:
        self.grants = [g for g in self.grants if g[1] is not session]

    # -- gated time -------------------------------------------------------

    def grant(self, session: BaseSession, seq: int, channel: str,
              until: float) -> None:
        until_tick = int(math.ceil(until / self.vehicle.dt - SCHED_EPS))
        if self.vehicle.ticks >= until_tick:
            session.enqueue("REP", channel,
                            {"success": True, "message": "already there",
                             "time": self.vehicle.sim_time},
                            seq=seq, stamp=self.stamp())
            return
        self.grants.append((until_tick, session, seq, channel))
        self.daemon.wake_ticker()

    def wants_tick(self) -> bool:
        ticks = self.vehicle.ticks
        return any(until > ticks for until, s, _, _ in self.grants
                   if not s.closed)

    # -- per-tick work ----------------------------------------------------

    def pump(self) -> None:
        """Answer queued requests immediately; time does not move."""
        for event in self.vehicle.pump():
            self._route_event(event)

    def tick_once(self) -> None:
        events = self.vehicle.tick()
        for event in events:
            self._route_event(event)
        self._publish_due()
        self._settle_grants()

    def _route_event(self, event: Event) -> None:
        token: Optional[Token] = event.token
        if token is not None and token.session.closed:
            return
        if event.kind == "reply":
            token.session.enqueue("REP", token.channel, event.payload,
                                  seq=token.seq, stamp=self.stamp())
        elif event.kind == "param":
            token.session.enqueue("PARAM_VAL", token.channel, event.payload,
                                  seq=token.seq, stamp=self.stamp())
        elif event.kind == "media":
            channel = "storage/media" if isinstance(token.session,
                                                    DroneSession) \
                else "%s/storage/media" % self.name
            token.session.enqueue("PUB", channel, event.payload,
                                  stamp=self.stamp())
        elif event.kind == "warning":
            if token is None:
                log.info("%s: %s", self.name, event.message)
            else:
                token.session.enqueue("ERR", token.channel,
                                      {"error": event.message},
                                      seq=token.seq, stamp=self.stamp())

    def _publish_due(self) -> None:
        if not self.subscribers:
            return
        sim = self.vehicle.sim_time
        for topic in sorted(self.subscribers):
            due = self.next_due.get(topic)
            if due is None or sim + SCHED_EPS < due:
                continue
            spec = protocol.TOPICS[topic]
            rate = spec.rate_hz or protocol.UNSPECIFIED_RATE_HZ
            period = 1.0 / rate
            payload = self.vehicle.topic_payload(topic)
            stamp = self.stamp()
            for session, wire in self.subscribers[topic]:
                session.enqueue_pub(wire, payload, stamp)
            due += period
            if due < sim - period:
                # Fell behind by more than a period; rejoin the grid instead
                # of burst-publishing the missed samples.
                due = (math.floor(sim / period + SCHED_EPS) + 1) * period
            self.next_due[topic] = due

    def _settle_grants(self) -> None:
        if not self.grants:
            return
        ticks = self.vehicle.ticks
        remaining = []
        for until, session, seq, channel in self.grants:
            if session.closed:
                continue
            if ticks >= until:
                session.enqueue("REP", channel,
                                {"success": True, "message": "advanced",
                                 "time": self.vehicle.sim_time},
                                seq=seq, stamp=self.stamp())
            else:
                remaining.append((until, session, seq, channel))
        self.grants = remaining


class Daemon:
    """Socket servers plus the fleet tick loop."""

    def __init__(self, config: FleetConfig):
        config.validate()
        self.config = config
        self.actors: dict[str, Actor] = {}
        for drone in config.drones:
            vehicle = Vehicle(VehicleConfig(
                name=drone.name,
                model=drone.model,
                dt=config.dt,
                latitude=drone.latitude,
                longitude=drone.longitude,
                yaw=math.radians(drone.yaw),
                ground_station=config.ground_station,
                require_arm=config.require_arm,
                storage_bytes=drone.storage_bytes,
            ))
            self.actors[drone.name] = Actor(self, vehicle)
        self.ordered_actors = [self.actors[d.name] for d in config.drones]
        self._servers: list[asyncio.AbstractServer] = []
        self._sessions: set[BaseSession] = set()
        self._ticker_task: Optional[asyncio.Task] = None
        self._work = asyncio.Event()
        self._running = False

    # -- info -------------------------------------------------------------

    def fleet_info(self) -> dict:
        return {
            "success": True,
            "message": "%d drone(s)" % len(self.config.drones),
            "drones": [
                {"name": d.name, "model": d.model, "port": d.port}
                for d in self.config.drones
            ],
        }

    def wake_ticker(self) -> None:
        self._work.set()

    # -- servers ----------------------------------------------------------

    async def start(self) -> None:
        self._running = True
        for drone in self.config.drones:
            actor = self.actors[drone.name]
            server = await asyncio.start_server(
                self._make_drone_handler(actor), host="127.0.0.1",
                port=drone.port)
            self._servers.append(server)
        server = await asyncio.start_server(
            self._handle_fleet, host="127.0.0.1", port=self.config.fleet_port)
        self._servers.append(server)
        if self.config.ws_port is not None:
            server = await asyncio.start_server(
                self._handle_ws, host="127.0.0.1", port=self.config.ws_port)
            self._servers.append(server)
        self._ticker_task = asyncio.get_running_loop().create_task(
            self._ticker())
        log.info("fleet up: %s; fleet port %d%s",
                 ", ".join("%s:%d" % (d.name, d.port)
                           for d in self.config.drones),
                 self.config.fleet_port,
                 "" if self.config.ws_port is None
                 else "; ws port %d" % self.config.ws_port)

    async def stop(self) -> None:
        self._running = False
        self._work.set()
        if self._ticker_task is not None:
            self._ticker_task.cancel()
            try:
                await self._ticker_task
            except asyncio.CancelledError:
                pass
        for session in list(self._sessions):
            session.close()
        for server in self._servers:
            server.close()
            await server.wait_closed()
        self._servers.clear()

    def _make_drone_handler(self, actor: Actor):
        async def handler(reader, writer):
            session = DroneSession(self, writer, actor)
            await self._serve(session, reader)
        return handler

    async def _handle_fleet(self, reader, writer):
        session = FleetSession(self, writer, "tcp:fleet")
        await self._serve(session, reader)

    async def _serve(self, session: BaseSession,
                     reader: asyncio.StreamReader) -> None:
        self._sessions.add(session)
        session.start_writer()
        decoder = FrameDecoder()
        try:
            while not session.closed:
                data = await reader.read(READ_CHUNK)
                if not data:
                    break
                try:
                    items = decoder.feed(data)
                except FramingError as exc:
                    session.handle_error(exc)
                    break
                for item in items:
                    if isinstance(item, ProtocolError):
                        session.handle_error(item)
                    else:
                        session.handle_envelope(item)
        except (ConnectionError, asyncio.CancelledError, OSError):
            pass
        finally:
            session.close()
            self._sessions.discard(session)
            self.wake_ticker()

    async def _handle_ws(self, reader, writer):
        try:
            await ws.server_handshake(reader, writer)
        except (ws.HandshakeError, ConnectionError, OSError,
                asyncio.IncompleteReadError) as exc:
            log.info("ws handshake failed: %s", exc)
            writer.close()
            return
        session = WsSession(self, writer, "ws")
        self._sessions.add(session)
        session.start_writer()
        try:
            async for message in ws.iter_messages(reader, writer):
                try:
                    env = protocol.decode(message.encode("utf-8"),
                                          validate=False)
                    self._validate_ws_envelope(env)
                except ProtocolError as exc:
                    session.handle_error(exc)
                    continue
                session.handle_envelope(env)
        except (ConnectionError, asyncio.CancelledError, OSError,
                ws.FrameError, asyncio.IncompleteReadError):
            pass
        finally:
            session.close()
            self._sessions.discard(session)
            self.wake_ticker()

    def _validate_ws_envelope(self, env: Envelope) -> None:
        # Strip the drone prefix, then apply the registry validation the
        # TCP path gets from decode().
        head, _, rest = env.channel.partition("/")
        if head in self.actors and rest:
            env = Envelope(env.kind, rest, env.seq, env.stamp, env.payload)
        protocol.validate_envelope(env)

    # -- simulation clock ---------------------------------------------------

    async def _ticker(self) -> None:
        if self.config.realtime_factor > 0:
            await self._ticker_paced()
        else:
            await self._ticker_gated()

    async def _ticker_paced(self) -> None:
        loop = asyncio.get_running_loop()
        period = self.config.dt / self.config.realtime_factor
        next_wall = loop.time()
        behind = 0
        while self._running:
            for actor in self.ordered_actors:
                actor.tick_once()
            next_wall += period
            delay = next_wall - loop.time()
            if delay > 0:
                behind = 0
                await asyncio.sleep(delay)
            else:
                next_wall = loop.time()
                behind += 1
                if behind >= TICKS_PER_YIELD:
                    behind = 0
                    await asyncio.sleep(0)

    async def _ticker_gated(self) -> None:
        burst = 0
        while self._running:
            progressed = False
            for actor in self.ordered_actors:
                if actor.wants_tick():
                    actor.tick_once()
                    progressed = True
            if progressed:
                burst += 1
                if burst >= TICKS_PER_YIELD:
                    burst = 0
                    await asyncio.sleep(0)
                continue
            self._work.clear()
            if any(a.wants_tick() for a in self.ordered_actors):
                continue
            await self._work.wait()


async def _run(config: FleetConfig) -> None:
    daemon = Daemon(config)
    await daemon.start()
    stop = asyncio.Event()
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        try:
            loop.add_signal_handler(sig, stop.set)
        except NotImplementedError:
            pass
    await stop.wait()
    log.info("shutting down")
    await daemon.stop()


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="simd", description="drone fleet simulation daemon")
    parser.add_argument("--config", help="fleet YAML file")
    parser.add_argument("--base-port", type=int,
                        help="first drone port (fleet port is one below)")
    parser.add_argument("--realtime-factor", type=float,
                        help="simulation speed; 0 waits for sim/advance")
    parser.add_argument("--ws-port", type=int, help="websocket bridge port")
    parser.add_argument("--log-level", default=None,
                        help="debug, info, warning, or error")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, overrides={
            "base_port": args.base_port,
            "realtime_factor": args.realtime_factor,
            "ws_port": args.ws_port,
            "log_level": args.log_level,
        })
    except (ConfigError, OSError) as exc:
        parser.error(str(exc))
        return 2
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        asyncio.run(_run(config))
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
