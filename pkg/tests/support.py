"""Shared helpers for the test suite: schema-driven payload samplers."""

from __future__ import annotations

import numpy as np

from fleetsim import protocol
from fleetsim.params import PARAM_SPECS

_WORDS = ("alpha", "bravo", "delta", "echo", "kilo", "lima", "zulu")


def sample_field(field: protocol.Field, rng: np.random.Generator):
    if field.type == "float":
        lo = field.lo if field.lo is not None else -1000.0
        hi = field.hi if field.hi is not None else 1000.0
        return float(rng.uniform(lo, hi))
    if field.type == "int":
        if field.choices:
            return int(rng.choice(list(field.choices)))
        lo = int(field.lo) if field.lo is not None else -1000
        hi = int(field.hi) if field.hi is not None else 1000
        hi = min(hi, 2**62)  # keep numpy integer sampling in int64 range
        return int(rng.integers(lo, hi + 1))
    if field.type == "bool":
        return bool(rng.integers(0, 2))
    if field.type == "str":
        if field.choices:
            return str(rng.choice(list(field.choices)))
        return str(rng.choice(_WORDS))
    if field.type == "array":
        count = int(rng.integers(0, 3))
        return [sample_payload(field.items, rng) for _ in range(count)]
    raise AssertionError("unhandled field type %r" % field.type)


def sample_payload(schema: protocol.Schema, rng: np.random.Generator) -> dict:
    payload = {}
    for name, field in schema.fields.items():
        if not field.required and rng.uniform() < 0.5:
            continue
        payload[name] = sample_field(field, rng)
    return payload


def sample_param_value(name: str, rng: np.random.Generator):
    spec = PARAM_SPECS[name]
    if spec.kind == "bool":
        return bool(rng.integers(0, 2))
    if spec.kind == "int":
        if spec.choices:
            return int(rng.choice(list(spec.choices)))
        return int(rng.integers(spec.minimum, spec.maximum + 1))
    if spec.kind == "float":
        return float(rng.uniform(spec.minimum, spec.maximum))
    if spec.choices:
        return str(rng.choice(list(spec.choices)))
    return str(rng.choice(_WORDS))


def sample_envelope(rng: np.random.Generator) -> protocol.Envelope:
    """A random well-formed envelope drawn across the whole registry."""
    seq = int(rng.integers(0, 2**32))
    stamp = int(rng.integers(0, 2**48))
    roll = rng.uniform()
    if roll < 0.30:
        spec = _pick(protocol.TOPICS, rng)
        return protocol.Envelope("PUB", spec.name, seq, stamp,
                                 sample_payload(spec.schema, rng))
    if roll < 0.40:
        spec = _pick(protocol.COMMAND_TOPICS, rng)
        return protocol.Envelope("PUB", spec.name, seq, stamp,
                                 sample_payload(spec.schema, rng))
    if roll < 0.50:
        spec = _pick(protocol.TOPICS, rng)
        kind = "SUB" if rng.uniform() < 0.5 else "UNSUB"
        return protocol.Envelope(kind, spec.name, seq, stamp, {})
    if roll < 0.62:
        spec = _pick(protocol.SERVICES, rng)
        return protocol.Envelope("REQ", spec.name, seq, stamp,
                                 sample_payload(spec.request, rng))
    if roll < 0.74:
        spec = _pick(protocol.SERVICES, rng)
        return protocol.Envelope("REP", spec.name, seq, stamp,
                                 sample_payload(spec.reply, rng))
    if roll < 0.82:
        name = str(rng.choice(protocol.PARAMETERS))
        return protocol.Envelope("PARAM_SET", name, seq, stamp,
                                 {"value": sample_param_value(name, rng)})
    if roll < 0.88:
        name = str(rng.choice(protocol.PARAMETERS))
        return protocol.Envelope("PARAM_GET", name, seq, stamp, {})
    if roll < 0.94:
        name = str(rng.choice(protocol.PARAMETERS))
        return protocol.Envelope("PARAM_VAL", name, seq, stamp,
                                 {"value": sample_param_value(name, rng)})
    channel = str(rng.choice(_WORDS)) + "/" + str(rng.choice(_WORDS))
    return protocol.Envelope("ERR", channel, seq, stamp,
                             {"error": str(rng.choice(_WORDS))})


def _pick(registry: dict, rng: np.random.Generator):
    names = sorted(registry)
    return registry[str(rng.choice(names))]


class DaemonThread:
    """Runs a Daemon on its own asyncio loop in a background thread."""

    def __init__(self, config):
        import threading

        self.config = config
        self.loop = None
        self.daemon = None
        self.error = None
        self._started = threading.Event()
        self._stop = None
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name="daemon-thread")

    def _run(self):
        import asyncio

        try:
            asyncio.run(self._main())
        except Exception as exc:  # surfaced via .stop()
            self.error = exc
            self._started.set()

    async def _main(self):
        import asyncio

        from fleetsim.daemon import Daemon

        self.loop = asyncio.get_running_loop()
        self._stop = asyncio.Event()
        self.daemon = Daemon(self.config)
        await self.daemon.start()
        self._started.set()
        await self._stop.wait()
        await self.daemon.stop()

    def __enter__(self):
        self._thread.start()
        assert self._started.wait(10), "daemon did not start"
        if self.error is not None:
            raise self.error
        return self

    def __exit__(self, *exc):
        if self.loop is not None and self._stop is not None:
            self.loop.call_soon_threadsafe(self._stop.set)
        self._thread.join(10)


def find_port_block(count):
    """A run of consecutive localhost ports that are free right now."""
    import random
    import socket

    rng = random.Random()
    for _ in range(300):
        base = rng.randint(20000, 60000)
        socks = []
        try:
            for offset in range(count):
                s = socket.socket()
                s.bind(("127.0.0.1", base + offset))
                socks.append(s)
        except OSError:
            continue
        finally:
            for s in socks:
                s.close()
        if len(socks) == count:
            return base
    raise RuntimeError("no free port block of %d found" % count)


def gated_fleet(drones, ws=False, **kwargs):
    """FleetConfig on a fresh port block, gated clock unless overridden.

    Each drone is (name, model) or (name, model, extras) where extras are
    DroneConfig fields such as yaw or storage_bytes.
    """
    from fleetsim.config import DroneConfig, FleetConfig

    block = find_port_block(len(drones) + 1 + (1 if ws else 0))
    base = block + 1  # block start is the fleet port
    entries = []
    for i, drone in enumerate(drones):
        name, model = drone[0], drone[1]
        extras = drone[2] if len(drone) > 2 else {}
        entries.append(DroneConfig(name=name, model=model, port=base + i,
                                   **extras))
    kwargs.setdefault("realtime_factor", 0.0)
    return FleetConfig(
        base_port=base, drones=entries,
        ws_port=base + len(drones) if ws else None, **kwargs)
