"""Daemon behavior over real sockets: sessions, routing, gated time.

Every test here runs a Daemon on a background event loop and talks to it
through plain TCP or WebSocket clients, with the simulation clock gated
(realtime_factor 0) so message counts are exact.
"""

import asyncio
import json
import socket
import struct
import threading
import time

import pytest

from fleetsim import protocol, ws
from fleetsim.client import (CallError, CallTimeout, DroneHandle, fleet_info)
from fleetsim.daemon import BaseSession, Daemon, TOPIC_QUEUE_DEPTH
from fleetsim.protocol import Envelope, FrameDecoder

from support import DaemonThread, gated_fleet


@pytest.fixture()
def fleet():
    config = gated_fleet([("alpha", "4k"), ("bravo", "ai")])
    with DaemonThread(config) as dt:
        yield config, dt


class RawClient:
    """Bare envelope socket for tests that need protocol-level control."""

    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port), timeout=5)
        self.sock.settimeout(5)
        self.decoder = FrameDecoder()
        self.seq = 0
        self.inbox = []

    def send(self, kind, channel, payload, seq=None, validate=True):
        self.seq += 1
        seq = self.seq if seq is None else seq
        env = Envelope(kind, channel, seq, 0, payload)
        self.sock.sendall(protocol.encode_frame(env, validate=validate))
        return seq

    def send_bytes(self, data):
        self.sock.sendall(data)

    def recv_until(self, pred, timeout=5.0):
        deadline = time.monotonic() + timeout
        while True:
            for i, env in enumerate(self.inbox):
                if pred(env):
                    return self.inbox.pop(i)
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("no matching envelope; have %r"
                                   % [(e.kind, e.channel) for e in self.inbox])
            self.sock.settimeout(remaining)
            data = self.sock.recv(65536)
            if not data:
                raise ConnectionError("closed")
            self.inbox.extend(e for e in self.decoder.feed(data)
                              if isinstance(e, Envelope))

    def reply_for(self, seq, timeout=5.0):
        return self.recv_until(
            lambda e: e.seq == seq and e.kind in ("REP", "PARAM_VAL", "ERR"),
            timeout)

    def take(self, pred):
        kept, out = [], []
        for env in self.inbox:
            (out if pred(env) else kept).append(env)
        self.inbox = kept
        return out

    def close(self):
        self.sock.close()


class TestTcpSessions:
    def test_hello_identifies_the_drone(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[1].port)
        seq = client.send("REQ", "connection/hello", {"client": "t"})
        env = client.reply_for(seq)
        assert env.kind == "REP"
        assert env.payload["name"] == "bravo"
        assert env.payload["model"] == "ai"
        assert env.payload["protocol"] == protocol.PROTOCOL_VERSION
        client.close()

    def test_fleet_port_lists_drones_and_rejects_the_rest(self, fleet):
        config, _ = fleet
        info = fleet_info("127.0.0.1", config.fleet_port)
        assert [d["name"] for d in info["drones"]] == ["alpha", "bravo"]
        assert info["drones"][0]["port"] == config.drones[0].port

        client = RawClient("127.0.0.1", config.fleet_port)
        seq = client.send("REQ", "drone/takeoff", {})
        env = client.reply_for(seq)
        assert env.kind == "ERR"
        assert "unknown drone" in env.payload["error"]
        client.close()

    def test_service_replies_even_with_time_stopped(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        seq = client.send("REQ", "drone/takeoff", {})
        env = client.reply_for(seq, timeout=2.0)
        assert env.kind == "REP"
        # still CONNECTING at t=0, so the reply is an honest refusal
        assert env.payload["success"] is False
        client.close()

    def test_param_set_and_get_round_trip(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        seq = client.send("PARAM_SET", "drone/max_altitude", {"value": 50.0})
        env = client.reply_for(seq)
        assert env.kind == "PARAM_VAL"
        assert env.payload["value"] == 50.0
        seq = client.send("PARAM_GET", "drone/max_altitude", {})
        assert client.reply_for(seq).payload["value"] == 50.0
        client.close()

    def test_pub_to_telemetry_topic_is_refused(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        seq = client.send("PUB", "drone/altitude",
                          {"stamp": 0, "data": 99.0})
        env = client.reply_for(seq)
        assert env.kind == "ERR"
        assert "read-only" in env.payload["error"]
        client.close()

    def test_rep_from_client_is_rejected(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        seq = client.send("REP", "drone/takeoff",
                          {"success": True, "message": "no"})
        env = client.reply_for(seq)
        assert env.kind == "ERR"
        assert "unexpected kind" in env.payload["error"]
        client.close()

    def test_malformed_body_answers_err_and_keeps_session(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        body = b"{this is not json"
        client.send_bytes(struct.pack(">I", len(body)) + body)
        env = client.recv_until(lambda e: e.kind == "ERR")
        assert env.channel == "protocol"
        # session still answers
        seq = client.send("REQ", "connection/hello", {})
        assert client.reply_for(seq).payload["name"] == "alpha"
        client.close()

    def test_oversize_frame_closes_the_session(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        client.send_bytes(struct.pack(">I", 2**31))
        with pytest.raises((ConnectionError, TimeoutError)):
            while True:
                client.recv_until(lambda e: False, timeout=2.0)
        client.close()

    def test_pub_seq_strictly_increases_per_session(self, fleet):
        # replies echo the request seq; published telemetry gets its own
        # per-session counter that must never repeat or go backwards
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        client.send("SUB", "drone/attitude", {})
        client.send("SUB", "battery/voltage", {})
        client.send("REQ", "sim/advance", {"until": 2.0})
        client.recv_until(lambda e: e.kind == "REP"
                          and e.channel == "sim/advance")
        seqs = [e.seq for e in client.inbox if e.kind == "PUB"]
        client.take(lambda e: True)
        assert len(seqs) == 62  # 60 attitude + 2 voltage
        assert all(b > a for a, b in zip(seqs, seqs[1:]))
        client.close()


class TestGatedTime:
    def test_advance_reports_reached_time(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        seq = client.send("REQ", "sim/advance", {"until": 0.5})
        env = client.reply_for(seq)
        assert env.kind == "REP"
        assert env.payload["time"] == pytest.approx(0.5, abs=1e-9)
        # asking for the past answers immediately with the current time
        seq = client.send("REQ", "sim/advance", {"until": 0.1})
        env = client.reply_for(seq, timeout=2.0)
        assert env.payload["time"] == pytest.approx(0.5, abs=1e-9)
        client.close()

    def test_topic_counts_match_declared_rates_exactly(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        for topic in ("drone/attitude", "battery/voltage", "camera/zoom"):
            client.send("SUB", topic, {})
        seq = client.send("REQ", "sim/advance", {"until": 2.0})
        client.reply_for(seq, timeout=30.0)
        pubs = client.take(lambda e: e.kind == "PUB")
        by_channel = {}
        for env in pubs:
            by_channel.setdefault(env.channel, []).append(env)
        assert len(by_channel["drone/attitude"]) == 60  # 30 Hz * 2 s
        assert len(by_channel["battery/voltage"]) == 2  # 1 Hz
        assert len(by_channel["camera/zoom"]) == 10  # 5 Hz
        stamps = [e.stamp for e in by_channel["drone/attitude"]]
        assert stamps == sorted(stamps)
        assert stamps[0] > 0
        client.close()

    def test_unsubscribe_stops_the_stream(self, fleet):
        config, _ = fleet
        client = RawClient("127.0.0.1", config.drones[0].port)
        client.send("SUB", "drone/attitude", {})
        seq = client.send("REQ", "sim/advance", {"until": 1.0})
        client.reply_for(seq, timeout=30.0)
        assert client.take(lambda e: e.kind == "PUB")
        useq = client.send("UNSUB", "drone/attitude", {})
        client.reply_for(useq)
        seq = client.send("REQ", "sim/advance", {"until": 2.0})
        client.reply_for(seq, timeout=30.0)
        assert not client.take(lambda e: e.kind == "PUB")
        client.close()

    def test_clocks_are_independent_per_drone(self, fleet):
        config, _ = fleet
        a = RawClient("127.0.0.1", config.drones[0].port)
        b = RawClient("127.0.0.1", config.drones[1].port)
        seq = a.send("REQ", "sim/advance", {"until": 3.0})
        a.reply_for(seq, timeout=30.0)
        seq = b.send("REQ", "sim/advance", {"until": 0.0})
        env = b.reply_for(seq)
        assert env.payload["time"] == 0.0
        a.close()
        b.close()

    def test_two_sessions_share_one_drone(self, fleet):
        config, _ = fleet
        a = RawClient("127.0.0.1", config.drones[0].port)
        b = RawClient("127.0.0.1", config.drones[0].port)
        a.send("SUB", "drone/altitude", {})
        b.send("SUB", "drone/altitude", {})
        seq_b = b.send("REQ", "sim/advance", {"until": 1.0})
        b.reply_for(seq_b, timeout=30.0)
        # both subscribers saw the same advance window
        b_pubs = b.take(lambda e: e.kind == "PUB")
        a.recv_until(lambda e: e.kind == "PUB")
        a_pubs = a.take(lambda e: e.kind == "PUB")
        assert len(b_pubs) == 30
        assert a_pubs
        # replies go only to the requester
        assert not a.take(lambda e: e.kind == "REP"
                          and e.channel == "sim/advance")
        a.close()
        b.close()


class TestResilience:
    def test_abrupt_client_kill_leaves_daemon_serving(self, fleet):
        config, _ = fleet
        victim = RawClient("127.0.0.1", config.drones[0].port)
        victim.send("SUB", "drone/attitude", {})
        victim.send("SUB", "camera/image", {})
        victim.send("REQ", "sim/advance", {"until": 60.0})
        # kill without reading anything back, grant still open
        victim.sock.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER,
                               struct.pack("ii", 1, 0))
        victim.sock.close()

        survivor = RawClient("127.0.0.1", config.drones[0].port)
        seq = survivor.send("REQ", "connection/hello", {})
        assert survivor.reply_for(seq).payload["name"] == "alpha"
        seq = survivor.send("REQ", "sim/advance", {"until": 61.0})
        env = survivor.reply_for(seq, timeout=60.0)
        assert env.payload["time"] == pytest.approx(61.0)
        survivor.close()

    def test_reconnect_resumes_control(self, fleet):
        config, _ = fleet
        first = RawClient("127.0.0.1", config.drones[1].port)
        seq = first.send("REQ", "sim/advance", {"until": 0.5})
        first.reply_for(seq, timeout=30.0)
        seq = first.send("REQ", "drone/takeoff", {})
        assert first.reply_for(seq).payload["success"] is True
        first.close()

        second = RawClient("127.0.0.1", config.drones[1].port)
        second.send("SUB", "drone/state", {})
        seq = second.send("REQ", "sim/advance", {"until": 8.0})
        second.reply_for(seq, timeout=60.0)
        states = [e.payload["data"]
                  for e in second.take(lambda e: e.kind == "PUB")]
        assert "HOVERING" in states
        second.close()

    def test_slow_reader_never_stalls_the_clock(self, fleet):
        config, _ = fleet
        lagger = RawClient("127.0.0.1", config.drones[0].port)
        lagger.send("SUB", "drone/attitude", {})
        lagger.send("SUB", "drone/rpy", {})
        driver = RawClient("127.0.0.1", config.drones[0].port)
        started = time.monotonic()
        seq = driver.send("REQ", "sim/advance", {"until": 90.0})
        env = driver.reply_for(seq, timeout=60.0)
        assert env.payload["time"] == pytest.approx(90.0)
        assert time.monotonic() - started < 30.0
        lagger.close()
        driver.close()


class TestBackpressure:
    def test_per_topic_queue_drops_oldest(self):
        class DummyDaemon:
            actors = {}

        class DummyWriter:
            def write(self, data):
                pass

            def close(self):
                pass

        session = BaseSession(DummyDaemon(), DummyWriter(), "test")
        for i in range(TOPIC_QUEUE_DEPTH + 9):
            session.enqueue_pub("drone/attitude", {"n": i}, stamp=i)
        session.enqueue_pub("battery/voltage", {"n": 0}, stamp=0)
        queued = [item for item in session._queue if not item.dropped]
        attitude = [i for i in queued if i.topic == "drone/attitude"]
        voltage = [i for i in queued if i.topic == "battery/voltage"]
        assert len(attitude) == TOPIC_QUEUE_DEPTH
        assert len(voltage) == 1  # independent per-topic budget
        # the oldest frames are the ones that fell off
        assert attitude[0].env.payload["n"] == 9
        dropped = [item for item in session._queue if item.dropped]
        assert [d.env.payload["n"] for d in dropped] == list(range(9))


class TestWsBridge:
    @pytest.fixture()
    def ws_fleet(self):
        config = gated_fleet([("alpha", "4k"), ("bravo", "ai")], ws=True)
        with DaemonThread(config) as dt:
            yield config, dt

    def run(self, coro):
        return asyncio.run(coro)

    def test_prefixed_channels_route_to_the_named_drone(self, ws_fleet):
        config, _ = ws_fleet

        async def scenario():
            client = await ws.WsClient.connect("127.0.0.1", config.ws_port)
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "bravo/connection/hello",
                "seq": 1, "stamp": 0, "payload": {}}))
            reply = json.loads(await client.recv())
            await client.close()
            return reply

        reply = self.run(scenario())
        assert reply["channel"] == "bravo/connection/hello"
        assert reply["payload"]["model"] == "ai"

    def test_unknown_prefix_is_an_error_not_a_disconnect(self, ws_fleet):
        config, _ = ws_fleet

        async def scenario():
            client = await ws.WsClient.connect("127.0.0.1", config.ws_port)
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "ghost/drone/takeoff",
                "seq": 1, "stamp": 0, "payload": {}}))
            first = json.loads(await client.recv())
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "fleet/info",
                "seq": 2, "stamp": 0, "payload": {}}))
            second = json.loads(await client.recv())
            await client.close()
            return first, second

        first, second = self.run(scenario())
        assert first["kind"] == "ERR"
        assert second["kind"] == "REP"
        assert len(second["payload"]["drones"]) == 2

    def test_subscription_stream_carries_the_prefix(self, ws_fleet):
        config, _ = ws_fleet

        async def scenario():
            client = await ws.WsClient.connect("127.0.0.1", config.ws_port)
            await client.send_text(json.dumps({
                "kind": "SUB", "channel": "alpha/drone/state",
                "seq": 1, "stamp": 0, "payload": {}}))
            assert json.loads(await client.recv())["kind"] == "REP"
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "alpha/sim/advance",
                "seq": 2, "stamp": 0, "payload": {"until": 0.2}}))
            pubs = []
            while True:
                msg = json.loads(await client.recv())
                if msg["kind"] == "REP":
                    break
                pubs.append(msg)
            await client.close()
            return pubs

        pubs = self.run(scenario())
        assert pubs
        assert all(p["channel"] == "alpha/drone/state" for p in pubs)
        assert pubs[0]["payload"]["data"] == "CONNECTING"

    def test_malformed_json_keeps_the_session(self, ws_fleet):
        config, _ = ws_fleet

        async def scenario():
            client = await ws.WsClient.connect("127.0.0.1", config.ws_port)
            await client.send_text("{broken")
            first = json.loads(await client.recv())
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "alpha/connection/hello",
                "seq": 1, "stamp": 0, "payload": {}}))
            second = json.loads(await client.recv())
            await client.close()
            return first, second

        first, second = self.run(scenario())
        assert first["kind"] == "ERR"
        assert second["payload"]["name"] == "alpha"

    def test_invalid_envelope_shape_is_reported(self, ws_fleet):
        config, _ = ws_fleet

        async def scenario():
            client = await ws.WsClient.connect("127.0.0.1", config.ws_port)
            await client.send_text(json.dumps({
                "kind": "REQ", "channel": "alpha/not/a/channel",
                "seq": 1, "stamp": 0, "payload": {}}))
            reply = json.loads(await client.recv())
            await client.close()
            return reply

        reply = self.run(scenario())
        assert reply["kind"] == "ERR"


class TestWallPaced:
    def test_telemetry_flows_without_advance(self):
        config = gated_fleet([("solo", "4k")], realtime_factor=100.0)
        with DaemonThread(config):
            client = RawClient("127.0.0.1", config.drones[0].port)
            client.send("SUB", "drone/rpy", {})
            first = client.recv_until(lambda e: e.kind == "PUB",
                                      timeout=10.0)
            second = client.recv_until(lambda e: e.kind == "PUB",
                                       timeout=10.0)
            assert second.stamp > first.stamp
            client.close()

    def test_wall_paced_advance_still_answers(self):
        config = gated_fleet([("solo", "4k")], realtime_factor=100.0)
        with DaemonThread(config):
            client = RawClient("127.0.0.1", config.drones[0].port)
            seq = client.send("REQ", "sim/advance", {"until": 1.0})
            env = client.reply_for(seq, timeout=30.0)
            assert env.payload["time"] >= 1.0
            client.close()
