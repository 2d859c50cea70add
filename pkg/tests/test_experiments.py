"""Experiment runner: spec parsing, command profile, CSV output."""

import io
import textwrap

import pytest

from fleetsim.client import DroneHandle
from fleetsim.experiments import (BUILTIN_SPECS, CSV_HEADER, ExperimentError,
                                  ExperimentSpec, load_spec, resolve_spec,
                                  run_experiment)

from support import DaemonThread, gated_fleet


class TestSpec:
    def test_command_profile_holds_reverses_and_zeroes(self):
        spec = ExperimentSpec("pitch", 40.0, hold=2.0, reverse=True, tail=3.0)
        assert spec.command_at(0.0) == 40.0
        assert spec.command_at(1.99) == 40.0
        assert spec.command_at(2.0) == -40.0
        assert spec.command_at(3.99) == -40.0
        assert spec.command_at(4.0) == 0.0
        assert spec.command_at(6.9) == 0.0
        assert spec.duration == pytest.approx(7.0)

    def test_no_reverse_profile_skips_the_negative_phase(self):
        spec = ExperimentSpec("vertical", 4.0, hold=1.5, reverse=False,
                              tail=0.5)
        assert spec.command_at(1.49) == 4.0
        assert spec.command_at(1.5) == 0.0
        assert spec.duration == pytest.approx(2.0)

    def test_unknown_channel_is_rejected(self):
        with pytest.raises(ExperimentError):
            ExperimentSpec("warp", 1.0)

    def test_nonpositive_rate_is_rejected(self):
        with pytest.raises(ExperimentError):
            ExperimentSpec("pitch", 1.0, rate=0.0)


class TestYaml:
    def test_load_spec_reads_the_fields(self, tmp_path):
        path = tmp_path / "step.yaml"
        path.write_text(textwrap.dedent("""\
            experiment:
              channel: roll
              amplitude: 25
              hold: 1.0
              reverse: false
              tail: 2.0
              name: quarter-roll
        """))
        spec = load_spec(str(path))
        assert spec.channel == "roll"
        assert spec.amplitude == 25.0
        assert spec.hold == 1.0
        assert spec.reverse is False
        assert spec.name == "quarter-roll"

    def test_top_level_keys_work_too(self, tmp_path):
        path = tmp_path / "flat.yaml"
        path.write_text("channel: vertical\namplitude: 3\n")
        spec = load_spec(str(path))
        assert spec.channel == "vertical"
        assert spec.hold == 2.0  # default

    def test_missing_amplitude_is_an_error(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("channel: pitch\n")
        with pytest.raises(ExperimentError):
            load_spec(str(path))

    def test_unknown_key_is_an_error(self, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text("channel: pitch\namplitude: 4\nholdd: 2\n")
        with pytest.raises(ExperimentError):
            load_spec(str(path))

    def test_resolve_prefers_builtins_then_paths(self, tmp_path):
        spec = resolve_spec("pitch-step")
        assert spec.channel == "pitch"
        path = tmp_path / "mine.yaml"
        path.write_text("channel: yaw\namplitude: 90\n")
        assert resolve_spec(str(path)).channel == "yaw"
        with pytest.raises(ExperimentError):
            resolve_spec("no-such-spec")

    def test_builtin_amplitudes_match_vehicle_limits(self):
        assert BUILTIN_SPECS["pitch-step"].amplitude == 40.0
        assert BUILTIN_SPECS["roll-step"].amplitude == 40.0
        assert BUILTIN_SPECS["vertical-step"].amplitude == 4.0
        assert BUILTIN_SPECS["yaw-step"].amplitude == 200.0


class TestRun:
    def run_csv(self, spec, model="4k"):
        config = gated_fleet([("probe", model)])
        with DaemonThread(config):
            with DroneHandle.connect("127.0.0.1",
                                     config.drones[0].port) as handle:
                handle.hello(client="tests")
                return run_experiment(handle, spec)

    def test_csv_shape_and_header(self):
        spec = ExperimentSpec("pitch", 10.0, hold=0.5, reverse=False,
                              tail=0.5)
        csv = self.run_csv(spec)
        lines = csv.strip().splitlines()
        assert lines[0] == CSV_HEADER
        # rows sample both endpoints: t = 0 .. 1 s inclusive at 30 Hz
        assert len(lines) == 1 + 31
        for line in lines[1:]:
            assert len(line.split(",")) == 7
        t0 = float(lines[1].split(",")[0])
        t1 = float(lines[2].split(",")[0])
        assert t1 - t0 == pytest.approx(1.0 / 30.0, abs=1e-6)

    def test_commanded_column_follows_the_profile(self):
        spec = ExperimentSpec("vertical", 2.0, hold=0.5, reverse=True,
                              tail=0.5)
        csv = self.run_csv(spec)
        rows = [line.split(",") for line in csv.strip().splitlines()[1:]]
        cmds = [float(r[1]) for r in rows]
        assert cmds[0] == 2.0
        assert cmds[15] == -2.0  # t = 0.5 s
        assert cmds[-1] == 0.0

    def test_measurement_tracks_a_vertical_step(self):
        spec = ExperimentSpec("vertical", 2.0, hold=1.5, reverse=False,
                              tail=0.0)
        csv = self.run_csv(spec)
        rows = [line.split(",") for line in csv.strip().splitlines()[1:]]
        meas = [float(r[2]) for r in rows]
        vz = [float(r[5]) for r in rows]
        assert meas[0] == pytest.approx(0.0, abs=0.05)
        assert meas[-1] == pytest.approx(2.0, abs=0.2)
        # for the vertical channel the measurement is the climb rate itself
        assert meas[-1] == pytest.approx(vz[-1], abs=1e-6)

    def test_two_fresh_daemons_produce_identical_csv(self):
        spec = ExperimentSpec("roll", 20.0, hold=0.6, reverse=True, tail=0.4)
        first = self.run_csv(spec)
        second = self.run_csv(spec)
        assert first == second
