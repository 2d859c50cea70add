"""Parameter store: defaults, validation, clamping and reset."""

import math

import pytest

from fleetsim.params import (
    PARAM_NAMES,
    PARAM_SPECS,
    ParameterStore,
    ParameterTypeError,
    ParameterValueError,
    ReadOnlyParameterError,
    UnknownParameterError,
)

EXPECTED_DEFAULTS = {
    "camera/autorecord": False,
    "camera/ev_compensation": 9,
    "camera/hdr": True,
    "camera/max_zoom_speed": 10.0,
    "camera/mode": 0,
    "camera/relative": False,
    "camera/rendering": 0,
    "camera/streaming": 0,
    "camera/style": 0,
    "drone/banked_turn": True,
    "drone/max_altitude": 2.0,
    "drone/max_distance": 10.0,
    "drone/max_horizontal_speed": 1.0,
    "drone/max_pitch_roll": 10.0,
    "drone/max_pitch_roll_rate": 200.0,
    "drone/max_vertical_speed": 1.0,
    "drone/max_yaw_rate": 180.0,
    "gimbal/max_speed": 180.0,
    "home/autotrigger": True,
    "home/ending_behavior": 1,
    "home/min_altitude": 20.0,
    "home/precise": True,
    "home/type": 4,
    "storage/download_folder": "~/Pictures/Anafi",
}


def make_store(model="4k"):
    return ParameterStore(model)


def test_every_expected_default():
    store = make_store()
    for name, want in EXPECTED_DEFAULTS.items():
        got = store.get(name)
        assert got == want, "%s: %r != %r" % (name, got, want)
        assert type(got) is type(want), name


def test_name_list_is_sorted_and_complete():
    assert list(PARAM_NAMES) == sorted(PARAM_SPECS)
    assert len(PARAM_NAMES) == 25
    store = make_store()
    assert tuple(store.names()) == PARAM_NAMES


def test_model_parameter_reflects_construction():
    assert make_store("ai").get("drone/model") == "ai"
    assert make_store("usa").get("drone/model") == "usa"


def test_model_parameter_is_read_only():
    store = make_store()
    with pytest.raises(ReadOnlyParameterError):
        store.set("drone/model", "thermal")


def test_unknown_parameter():
    store = make_store()
    with pytest.raises(UnknownParameterError):
        store.get("drone/bogus")
    with pytest.raises(UnknownParameterError):
        store.set("drone/bogus", 1)


def test_float_clamps_to_range():
    store = make_store()
    assert store.set("drone/max_pitch_roll", 50.0) == 40.0
    assert store.get("drone/max_pitch_roll") == 40.0
    assert store.set("drone/max_pitch_roll", -3.0) == 1.0
    assert store.set("drone/max_vertical_speed", 99.0) == 4.0
    assert store.set("drone/max_yaw_rate", 1000.0) == 200.0
    assert store.set("drone/max_altitude", 1e9) == 4000.0
    assert store.set("drone/max_distance", 0.0) == 10.0


def test_float_accepts_int_payload():
    store = make_store()
    value = store.set("drone/max_pitch_roll", 25)
    assert value == 25.0
    assert isinstance(store.get("drone/max_pitch_roll"), float)


def test_float_rejects_non_numeric():
    store = make_store()
    with pytest.raises(ParameterTypeError):
        store.set("drone/max_pitch_roll", "fast")
    with pytest.raises(ParameterTypeError):
        store.set("drone/max_pitch_roll", True)
    with pytest.raises(ParameterValueError):
        store.set("drone/max_pitch_roll", math.nan)


def test_int_choices_reject_out_of_set():
    store = make_store()
    assert store.set("home/type", 3) == 3
    with pytest.raises(ParameterValueError):
        store.set("home/type", 2)
    with pytest.raises(ParameterValueError):
        store.set("camera/mode", 5)
    with pytest.raises(ParameterTypeError):
        store.set("home/type", 1.5)
    with pytest.raises(ParameterTypeError):
        store.set("home/type", True)


def test_bool_is_strict():
    store = make_store()
    assert store.set("camera/autorecord", True) is True
    with pytest.raises(ParameterTypeError):
        store.set("camera/autorecord", 1)
    with pytest.raises(ParameterTypeError):
        store.set("camera/autorecord", "true")


def test_string_parameter():
    store = make_store()
    assert store.set("storage/download_folder", "/tmp/media") == "/tmp/media"
    with pytest.raises(ParameterTypeError):
        store.set("storage/download_folder", 7)


def test_reset_restores_defaults_and_model():
    store = make_store("usa")
    store.set("drone/max_pitch_roll", 30.0)
    store.set("camera/mode", 1)
    store.reset()
    assert store.get("drone/max_pitch_roll") == 10.0
    assert store.get("camera/mode") == 0
    assert store.get("drone/model") == "usa"


def test_as_dict_round_trip():
    store = make_store()
    snap = store.as_dict()
    assert set(snap) == set(PARAM_NAMES)
    store.set("drone/max_yaw_rate", 150.0)
    assert snap["drone/max_yaw_rate"] == 180.0, "snapshot must be a copy"


def test_specs_have_descriptions_and_units():
    for name, spec in PARAM_SPECS.items():
        assert spec.description, name
        if spec.kind == "float":
            assert spec.minimum is not None and spec.maximum is not None, name
