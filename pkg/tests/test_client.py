"""Client SDK behavior against a live daemon."""

import base64
import socket
import threading
import time

import pytest

from fleetsim.client import (CallError, CallTimeout, ConnectionClosed,
                             DroneHandle)
from fleetsim.protocol import ProtocolError

from support import DaemonThread, gated_fleet


@pytest.fixture()
def handle():
    config = gated_fleet([("solo", "4k")])
    with DaemonThread(config):
        h = DroneHandle.connect("127.0.0.1", config.drones[0].port)
        h.hello(client="tests")
        yield h
        h.close()


class TestBasics:
    def test_hello_populates_identity(self, handle):
        assert handle.name == "solo"
        assert handle.model == "4k"

    def test_unknown_channel_is_rejected_locally(self, handle):
        with pytest.raises(ProtocolError):
            handle.call("drone/warp", {})
        with pytest.raises(ProtocolError):
            handle.call("drone/altitude", {})  # topic, not a service

    def test_server_error_reply_raises_call_error(self):
        # pointing a drone handle at the fleet port is the easy way to
        # provoke an ERR reply that passed local validation
        config = gated_fleet([("solo", "4k")])
        with DaemonThread(config):
            h = DroneHandle.connect("127.0.0.1", config.fleet_port)
            with pytest.raises(CallError):
                h.call("drone/takeoff", {})
            h.close()

    def test_read_only_publish_surfaces_via_drain_errors(self, handle):
        handle.publish("drone/altitude", {"stamp": 0, "data": 99.0})
        deadline = time.monotonic() + 2.0
        errors = []
        while not errors and time.monotonic() < deadline:
            errors = handle.drain_errors()
            time.sleep(0.01)
        assert errors
        assert "read-only" in errors[0]["error"]

    def test_param_round_trip(self, handle):
        assert handle.param_set("drone/max_altitude", 77.0) == 77.0
        assert handle.param_get("drone/max_altitude") == 77.0

    def test_bad_param_value_raises(self, handle):
        with pytest.raises(CallError):
            handle.param_set("camera/mode", 9)

    def test_close_makes_calls_fail_fast(self, handle):
        handle.close()
        with pytest.raises((ConnectionClosed, CallError, OSError)):
            handle.call("connection/hello", {})


class TestTelemetry:
    def test_callback_sees_every_sample_in_order(self, handle):
        got = []
        handle.subscribe("drone/rpy", lambda payload, stamp:
                         got.append((payload, stamp)))
        handle.advance(1.0)
        # delivery is asynchronous; poll briefly for the tail
        deadline = time.monotonic() + 2.0
        while len(got) < 30 and time.monotonic() < deadline:
            time.sleep(0.01)
        assert len(got) == 30
        stamps = [s for _, s in got]
        assert all(b > a for a, b in zip(stamps, stamps[1:]))

    def test_latest_returns_newest_sample(self, handle):
        handle.subscribe("drone/altitude")
        handle.advance(0.5)
        deadline = time.monotonic() + 2.0
        while handle.latest("drone/altitude") is None \
                and time.monotonic() < deadline:
            time.sleep(0.01)
        payload, stamp = handle.latest("drone/altitude")
        assert payload["data"] == 0.0  # still on the ground
        assert stamp > 0

    def test_wait_state_times_out_with_call_timeout(self, handle):
        handle.subscribe("drone/state")
        with pytest.raises(CallTimeout):
            handle.wait_state("FLYING", timeout_s=0.5)


class TestFlight:
    def test_takeoff_reaches_hover_quickly(self, handle):
        handle.subscribe("drone/state")
        handle.wait_state(("LANDED",), timeout_s=5.0)
        reply = handle.call("drone/takeoff", {})
        assert reply["success"] is True
        handle.wait_state(("HOVERING",), timeout_s=10.0)
        assert handle.sim_time() < 6.0

    def test_vertical_speed_respects_limit(self, handle):
        handle.subscribe("drone/state")
        handle.subscribe("drone/speed")
        handle.wait_state(("LANDED",), timeout_s=5.0)
        handle.param_set("drone/max_vertical_speed", 4.0)
        handle.call("skycontroller/offboard", {"data": True})
        assert handle.call("drone/takeoff", {})["success"] is True
        handle.wait_state(("HOVERING",), timeout_s=10.0)
        worst = 0.0
        for _ in range(60):  # 2 s of full-up stick
            handle.publish("drone/command",
                           {"roll": 0.0, "pitch": 0.0, "yaw": 0.0,
                            "gaz": 100.0})
            handle.advance(handle.sim_time() + 1.0 / 30.0)
            sample = handle.latest("drone/speed")
            if sample is not None:
                worst = max(worst, abs(sample[0]["z"]))
        assert worst <= 4.05

    def test_media_download_and_delete(self, handle):
        handle.subscribe("drone/state")
        handle.wait_state(("LANDED",), timeout_s=5.0)
        handle.param_set("camera/mode", 1)
        reply = handle.call("camera/photo/take", {"mode": 0})
        assert reply["success"] is True

        reply, chunks = handle.download_media()
        assert reply["success"] is True
        assert len(chunks) == 1
        chunk = chunks[0]
        assert chunk["kind"] == "photo"
        blob = base64.b64decode(chunk["data"])
        assert len(blob) == chunk["size"]

        _, again = handle.download_media(delete=True)
        assert len(again) == 1
        _, empty = handle.download_media()
        assert empty == []


class TestTimeouts:
    def test_call_timeout_against_a_silent_server(self):
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.bind(("127.0.0.1", 0))
        server.listen(1)
        port = server.getsockname()[1]
        accepted = []

        def soak():
            conn, _ = server.accept()
            accepted.append(conn)

        thread = threading.Thread(target=soak, daemon=True)
        thread.start()
        handle = DroneHandle.connect("127.0.0.1", port)
        started = time.monotonic()
        with pytest.raises(CallTimeout):
            handle.call("connection/hello", {}, timeout=0.3)
        assert time.monotonic() - started < 2.0
        handle.close()
        for conn in accepted:
            conn.close()
        server.close()
