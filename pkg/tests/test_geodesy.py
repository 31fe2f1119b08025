import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from cyclone_bands.geodesy import (
    EARTH_RADIUS_KM,
    LocalProjection,
    destination,
    gc_distance,
    initial_bearing,
    normalize_lon,
    wrap_delta_bearing,
)

QUARTER = math.pi * EARTH_RADIUS_KM / 2.0
lats = st.floats(-80, 80, allow_nan=False)
lons = st.floats(-180, 180, allow_nan=False)


def test_quarter_circles():
    assert gc_distance(0, 0, 0, 90) == pytest.approx(QUARTER, abs=1e-6)
    assert gc_distance(0, 0, 90, 0) == pytest.approx(QUARTER, abs=1e-6)
    assert gc_distance(12.5, -40, 12.5, -40) == 0.0


def test_one_degree_east_on_equator():
    km = math.pi * EARTH_RADIUS_KM / 180.0
    lat, lon = destination(0.0, 0.0, 90.0, km)
    assert lat == pytest.approx(0.0, abs=1e-9)
    assert lon == pytest.approx(1.0, abs=1e-3)


def test_cardinal_bearings():
    assert initial_bearing(0, 0, 1, 0) == pytest.approx(0.0)
    assert initial_bearing(0, 0, 0, 1) == pytest.approx(90.0)
    assert initial_bearing(0, 0, -1, 0) == pytest.approx(180.0)
    assert initial_bearing(0, 0, 0, -1) == pytest.approx(270.0)


def test_bearing_undefined_for_same_point():
    with pytest.raises(ValueError):
        initial_bearing(10, 20, 10, 20)


def test_zero_distance_destination_is_exact():
    assert destination(12.3, -45.6, 77.0, 0.0) == (12.3, -45.6)


def test_dateline_crossing():
    lat, lon = destination(0.0, 179.5, 90.0, 111.19508)
    assert lon == pytest.approx(-179.5, abs=1e-3)
    assert gc_distance(0, 179.5, 0, -179.5) == pytest.approx(111.195, abs=1e-3)


@pytest.mark.parametrize("prev,nxt,expected", [
    (350, 10, 20), (10, 350, -20), (0, 180, 180), (180, 0, 180), (90, 90, 0), (0, 181, -179),
])
def test_wrap_examples(prev, nxt, expected):
    assert wrap_delta_bearing(prev, nxt) == pytest.approx(expected)


@given(st.floats(-720, 720), st.floats(-720, 720))
def test_wrap_range(a, b):
    d = wrap_delta_bearing(a, b)
    assert -180.0 < d <= 180.0
    assert math.isclose(math.cos(math.radians(d)), math.cos(math.radians(b - a)), abs_tol=1e-9)


@given(lats, lons, lats, lons, lats, lons)
def test_triangle_inequality(a1, o1, a2, o2, a3, o3):
    ab = gc_distance(a1, o1, a2, o2)
    bc = gc_distance(a2, o2, a3, o3)
    ac = gc_distance(a1, o1, a3, o3)
    assert ac <= ab + bc + 1e-6


@given(lats, lons, lats, lons)
def test_distance_symmetric(a1, o1, a2, o2):
    assert gc_distance(a1, o1, a2, o2) == pytest.approx(gc_distance(a2, o2, a1, o1), abs=1e-9)


@given(lats, lons, st.floats(0, 360, exclude_max=True), st.floats(1.0, 3000.0))
def test_destination_round_trip(lat, lon, bearing, km):
    lat2, lon2 = destination(lat, lon, bearing, km)
    assume(abs(lat2) < 85)
    assert gc_distance(lat, lon, lat2, lon2) == pytest.approx(km, rel=1e-9, abs=1e-6)
    b = initial_bearing(lat, lon, lat2, lon2)
    assert abs(wrap_delta_bearing(bearing, b)) < 1e-6


@given(lons)
def test_normalize_lon_range(lon):
    w = normalize_lon(lon)
    assert -180.0 <= w < 180.0
    assert math.isclose(math.cos(math.radians(w)), math.cos(math.radians(lon)), abs_tol=1e-9)


def test_projection_round_trip_and_scale():
    proj = LocalProjection(30.0, -60.0)
    lat = np.array([25.0, 30.0, 35.0])
    lon = np.array([-65.0, -60.0, -179.0])
    x, y = proj.forward(lat, lon)
    la, lo = proj.inverse(x, y)
    np.testing.assert_allclose(la, lat, atol=1e-12)
    np.testing.assert_allclose(lo, lon, atol=1e-9)
    x1, y1 = proj.forward(30.0, -59.0)
    assert x1 == pytest.approx(111.19508 * math.cos(math.radians(30)), rel=1e-6)


def test_projection_center_uses_circular_mean():
    proj = LocalProjection.centered_on([0, 0], [179.0, -179.0])
    assert abs(proj.lon0) == pytest.approx(180.0)
