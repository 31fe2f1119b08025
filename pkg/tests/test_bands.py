import math
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from cyclone_bands import io
from cyclone_bands.bands import (
    ConvexHullBand,
    DegenerateBandError,
    DeltaBallBand,
    KdeBand,
    SphericalBand,
    in_convex_polygon,
    make_band,
    monotone_chain,
    shoelace_area,
)
from cyclone_bands.depth import DepthRanking, deepest_subset, distance_matrix, metric_depth
from cyclone_bands.geodesy import LocalProjection, destination, gc_distance
from cyclone_bands.synthetic import synthetic_storms
from cyclone_bands.tracks import Track

T0 = datetime(2005, 8, 20)
KM_PER_DEG = math.pi * 6371.0088 / 180.0


@pytest.fixture(scope="module")
def ensemble():
    # storms sharing a genesis region, like a simulated ensemble
    storms = synthetic_storms(120, seed=31)
    return [Track.from_arrays(f"E{i}", t.lat - t.lat[0] + 15, t.lon - t.lon[0] - 50, T0)
            for i, t in enumerate(storms)]


@pytest.fixture(scope="module")
def ranking(ensemble):
    return metric_depth(distance_matrix(ensemble))


def manual_ranking(n, first):
    order = np.array([first] + [i for i in range(n) if i != first])
    depths = np.zeros(n)
    depths[first] = 1.0
    return DepthRanking(depths, order)


# convex hull

def test_unit_square_hull():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    hull = monotone_chain(pts)
    assert len(hull) == 4
    assert shoelace_area(hull) == 1.0
    assert in_convex_polygon(hull, np.array([0.5, 1.0, 1.0001]), np.array([0.5, 0.5, 0.5])).tolist() == [
        True, True, False]


@settings(max_examples=40)
@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=3, max_size=60))
def test_hull_contains_its_points(pts):
    hull = monotone_chain(pts)
    if len(hull) < 3:
        return
    p = np.array(pts)
    assert in_convex_polygon(hull, p[:, 0], p[:, 1], tol=1e-9).all()
    assert shoelace_area(hull) >= 0


def test_hull_band_contains_subset(ensemble, ranking):
    band = ConvexHullBand(0.1).fit(ensemble, ranking)
    for i in band.subset_:
        assert band.contains_track(ensemble[i]).all()
    assert band.area() == shoelace_area(band.vertices_) > 0


def test_hull_monotone_in_alpha(ensemble, ranking):
    small = ConvexHullBand(0.10).fit(ensemble, ranking)
    big = ConvexHullBand(0.05).fit(ensemble, ranking)
    x, y = small.vertices_[:, 0], small.vertices_[:, 1]
    lat, lon = small.projection_.inverse(x, y)
    assert big.contains(lat, lon).all()
    assert big.area() >= small.area()


def test_hull_degenerate_collinear():
    tracks = [Track.from_arrays(f"L{i}", [0.0] * 4, [i + k for k in range(4)], T0) for i in range(5)]
    with pytest.raises(DegenerateBandError):
        ConvexHullBand(0.1).fit(tracks)


# delta-ball

def dball(lat, lon):
    return DeltaBallBand.from_params(lat, lon, 0.0)


def test_two_centres_delta_half_distance():
    b = dball([10.0, 10.5], [-40.0, -40.0])
    d = gc_distance(10.0, -40.0, 10.5, -40.0)
    assert 0.5 * b.nn_distances_.max() == pytest.approx(d / 2, rel=1e-12)


def test_equilateral_triangle_delta():
    s = 2.0
    side = gc_distance(0, 0, 0, s)
    lat = brentq(lambda a: gc_distance(0, 0, a, s / 2) - side, 0.1, 10)
    b = dball([0.0, 0.0, lat], [0.0, s, s / 2])
    assert 0.5 * b.nn_distances_.max() == pytest.approx(side / 2, rel=1e-9)


def test_collinear_zero_one_five_km():
    lon = np.array([0.0, 1.0, 5.0]) / KM_PER_DEG
    b = dball(np.zeros(3), lon)
    assert 0.5 * b.nn_distances_.max() == pytest.approx(2.0, rel=1e-9)


def test_delta_ball_fit_and_membership(ensemble, ranking):
    b = DeltaBallBand(0.1).fit(ensemble, ranking)
    assert len(b.subset_) == 108
    assert b.delta_ == 0.5 * b.nn_distances_.max()
    assert b.contains(b.center_lat_, b.center_lon_).all()
    far = destination(b.center_lat_[0], b.center_lon_[0], 0.0, 3 * b.delta_ + 1000)
    lat, lon = np.array([far[0]]), np.array([far[1]])
    if b.nearest_center_distance(lat, lon)[0] >= 3 * b.delta_:
        assert not b.contains(lat, lon)[0]


def test_point_three_delta_away_is_outside():
    b = DeltaBallBand.from_params([0.0, 0.0], [0.0, 0.5], 30.0)
    lat, lon = destination(0.0, 0.0, 180.0, 90.0)
    assert not b.contains(lat, lon)[0]
    assert b.contains(0.0, 0.25)[0]


def check_minimality(b):
    delta = b.delta_
    nn = b.nn_distances_
    assert np.all(nn <= 2 * delta * (1 + 1e-12))
    # shrinking delta by a hair leaves some ball with no overlapping neighbour
    assert np.any(nn > 2 * (delta - 1e-9 * delta))


@settings(max_examples=40)
@given(st.integers(2, 60), st.integers(0, 2**32))
def test_delta_minimality_property(n, seed):
    rng = np.random.default_rng(seed)
    lat, lon = rng.uniform(10, 30, n), rng.uniform(-80, -40, n)
    b = dball(lat, lon)
    b.delta_ = 0.5 * b.nn_distances_.max()
    check_minimality(b)
    # oracle: brute force nearest neighbours
    D = gc_distance(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    np.fill_diagonal(D, np.inf)
    np.testing.assert_allclose(b.nn_distances_, D.min(axis=1), rtol=1e-12)


def test_fitted_delta_minimal(ensemble, ranking):
    check_minimality(DeltaBallBand(0.1).fit(ensemble, ranking))


def test_disk_area():
    r = 100.0
    b = DeltaBallBand.from_params([20.0, 20.0], [-60.0, -60.0], r)
    assert b.area(r / 50) == pytest.approx(math.pi * r * r, rel=0.02)


def test_area_grid_convergence(ensemble, ranking):
    b = DeltaBallBand(0.1).fit(ensemble, ranking)
    coarse, fine = b.area(20.0), b.area(10.0)
    assert abs(coarse - fine) / fine < 0.01


def test_too_few_centres():
    with pytest.raises(DegenerateBandError):
        DeltaBallBand.from_params([1.0], [2.0], 5.0)


# spherical tube

def test_identical_curves_zero_radius():
    t = synthetic_storms(1, seed=3)[0]
    tracks = [Track.from_arrays(f"S{i}", t.lat, t.lon, T0) for i in range(6)]
    b = SphericalBand(0.1).fit(tracks)
    assert np.all(b.radii_ == 0)
    assert b.contains_track(t).all()


def offset_family(kms, n=5):
    lon = np.linspace(-60, -56, n)
    center = Track.from_arrays("C", [20.0] * n, lon, T0)
    others = []
    for i, km in enumerate(kms):
        la, lo = destination(np.full(n, 20.0), lon, 0.0, km)
        others.append(Track.from_arrays(f"O{i}", la, lo, T0))
    return [center] + others


def test_order_statistic_radius():
    tracks = offset_family(range(1, 11))
    b = SphericalBand(0.1).fit(tracks, manual_ranking(len(tracks), 0))
    np.testing.assert_allclose(b.radii_, 9.0, rtol=1e-9)
    assert b.center_index_ == 0


def test_radius_monotone_in_alpha(ensemble, ranking):
    r10 = SphericalBand(0.10).fit(ensemble, ranking).radii_
    r05 = SphericalBand(0.05).fit(ensemble, ranking).radii_
    assert np.all(r05 >= r10)


def test_alive_count_invariant(ensemble, ranking):
    b = SphericalBand(0.1).fit(ensemble, ranking)
    c = ensemble[b.center_index_]
    for t in range(len(c)):
        pts = [(o.lat[t], o.lon[t]) for i, o in enumerate(ensemble) if i != b.center_index_ and len(o) > t]
        if not pts:
            assert t in b.carried_steps_
            continue
        p = np.array(pts)
        d = gc_distance(c.lat[t], c.lon[t], p[:, 0], p[:, 1])
        need = math.ceil(round(0.9 * len(pts), 9))
        if len(np.unique(d)) == len(d):
            assert np.sum(d <= b.radii_[t]) == need
        else:
            # ties at the radius can only add members
            assert np.sum(d <= b.radii_[t]) >= need


def test_tube_between_disks():
    tracks = offset_family([50.0] * 9)
    b = SphericalBand(0.1).fit(tracks, manual_ranking(len(tracks), 0))
    # halfway between two centres, 40 km north: inside the tube, outside both disks
    la, lo = destination(20.0, -59.5, 0.0, 40.0)
    assert b.contains(la, lo)[0]
    la, lo = destination(20.0, -59.5, 0.0, 60.0)
    assert not b.contains(la, lo)[0]


# KDE

def test_kde_sample_fraction(ensemble):
    b = KdeBand(0.1).fit(ensemble)
    n = len(b.sample_density_)
    frac = np.mean(b.sample_density_ >= b.threshold_)
    assert abs(frac - 0.9) <= 1.0 / n


def test_kde_near_one_alpha_keeps_densest(ensemble):
    b = KdeBand(0.99).fit(ensemble)
    assert np.mean(b.sample_density_ >= b.threshold_) <= 0.01 + 1.0 / len(b.sample_density_)


def test_kde_normal_hdr_area():
    rng = np.random.default_rng(0)
    sigma = 100.0
    xy = rng.normal(scale=sigma, size=(10_000, 2))
    proj = LocalProjection(20.0, -60.0)
    lat, lon = proj.inverse(xy[:, 0], xy[:, 1])
    tracks = [Track.from_arrays(f"N{i}", lat[i::1000], lon[i::1000], T0) for i in range(1000)]
    b = KdeBand(0.1).fit(tracks)
    expected = math.pi * (-2 * math.log(0.1)) * sigma**2
    assert b.area(sigma / 20) == pytest.approx(expected, rel=0.15)


def test_kde_too_few_points():
    with pytest.raises(DegenerateBandError):
        KdeBand(0.1).fit([Track.from_arrays("X", [1, 2, 3], [4, 5, 6], T0)])


# shared

@pytest.mark.parametrize("kind", ["delta-ball", "hull", "kde", "spherical"])
def test_params_round_trip(kind, ensemble, ranking):
    band = make_band(kind, 0.1).fit(ensemble, ranking)
    again = io.band_from_params(io.band_params(band))
    rng = np.random.default_rng(1)
    lat = rng.uniform(10, 45, 400)
    lon = rng.uniform(-90, -20, 400)
    np.testing.assert_array_equal(band.contains(lat, lon), again.contains(lat, lon))


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_band("ellipse")


def test_predict_alias(ensemble, ranking):
    b = ConvexHullBand(0.1).fit(ensemble, ranking)
    X = np.column_stack([ensemble[0].lat, ensemble[0].lon])
    np.testing.assert_array_equal(b.predict(X), b.contains(X[:, 0], X[:, 1]))
