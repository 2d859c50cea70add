"""Plan file parsing."""

import pytest

from fleetsim import missions

GOOD = """QGC WPL 110
0\t48.0001\t11.0000\t10.0\t0.0
1\t48.0001\t11.0001\t10.0\t90.0
2\t48.0000\t11.0001\t12.5\t180.0
"""


def test_parse_good_plan():
    wps = missions.parse_plan(GOOD)
    assert len(wps) == 3
    assert wps[0].index == 0
    assert wps[1].latitude == 48.0001
    assert wps[1].longitude == 11.0001
    assert wps[2].altitude == 12.5
    assert wps[2].heading == 180.0


def test_comments_and_blank_lines_ignored():
    text = "# preamble\n\nQGC WPL 110\n# note\n0\t48.0\t11.0\t5.0\t0.0\n\n"
    wps = missions.parse_plan(text)
    assert len(wps) == 1


def test_missing_header():
    with pytest.raises(missions.PlanError, match="header"):
        missions.parse_plan("0\t48.0\t11.0\t5.0\t0.0\n")
    with pytest.raises(missions.PlanError, match="header"):
        missions.parse_plan("")


def test_no_waypoints():
    with pytest.raises(missions.PlanError, match="no waypoints"):
        missions.parse_plan("QGC WPL 110\n")


def test_field_count_error_names_line():
    text = "QGC WPL 110\n0\t48.0\t11.0\t5.0\n"
    with pytest.raises(missions.PlanError, match="line 2"):
        missions.parse_plan(text)


def test_non_numeric_field():
    text = "QGC WPL 110\n0\tnorth\t11.0\t5.0\t0.0\n"
    with pytest.raises(missions.PlanError, match="line 2"):
        missions.parse_plan(text)


def test_out_of_range_coordinates():
    text = "QGC WPL 110\n0\t91.0\t11.0\t5.0\t0.0\n"
    with pytest.raises(missions.PlanError, match="latitude"):
        missions.parse_plan(text)
    text = "QGC WPL 110\n0\t48.0\t181.0\t5.0\t0.0\n"
    with pytest.raises(missions.PlanError, match="longitude"):
        missions.parse_plan(text)


def test_index_must_be_sequential():
    text = "QGC WPL 110\n0\t48.0\t11.0\t5.0\t0.0\n2\t48.0\t11.0\t5.0\t0.0\n"
    with pytest.raises(missions.PlanError, match="out of order"):
        missions.parse_plan(text)


def test_format_round_trip():
    wps = missions.parse_plan(GOOD)
    again = missions.parse_plan(missions.format_plan(wps))
    assert again == wps
