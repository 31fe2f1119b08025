from datetime import datetime
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cyclone_bands.depth import (
    MetricDepth,
    curve_distance,
    deepest_subset,
    depth_counts,
    distance_matrix,
    metric_depth,
    metric_depth_bruteforce,
)
from cyclone_bands.synthetic import synthetic_storms
from cyclone_bands.tracks import Track
from tests.oracles import random_distance_matrix

T0 = datetime(2003, 9, 1)


def test_identical_tracks_zero():
    t = synthetic_storms(1, seed=1)[0]
    assert curve_distance(t, t) == 0.0


def test_parallel_equatorial_tracks():
    a = Track.from_arrays("A", [0, 0, 0], [0, 1, 2], T0)
    b = Track.from_arrays("B", [1, 1, 1], [0, 1, 2], T0)
    assert curve_distance(a, b) == pytest.approx(111.19, abs=0.1)


def test_curve_distance_symmetric_exactly():
    a, b = synthetic_storms(2, seed=4)
    assert curve_distance(a, b) == curve_distance(b, a)


def test_matrix_small_cases():
    t = synthetic_storms(3, seed=5)
    assert distance_matrix(t[:1]).tolist() == [[0.0]]
    D = distance_matrix(t)
    for i in range(3):
        for j in range(3):
            if i != j:
                assert D[i, j] == pytest.approx(curve_distance(t[i], t[j]), rel=1e-12)


def test_matrix_threads_identical():
    t = synthetic_storms(40, seed=6)
    np.testing.assert_array_equal(distance_matrix(t, 1), distance_matrix(t, 4))


def test_matrix_at_ensemble_scale_is_symmetric():
    D = distance_matrix(synthetic_storms(350, seed=9))
    assert D.shape == (350, 350)
    np.testing.assert_array_equal(D, D.T)
    assert np.all(np.diag(D) == 0)


def test_collinear_depths():
    D = np.array([[0, 1, 2], [1, 0, 1], [2, 1, 0]], dtype=float)
    r = metric_depth(D)
    np.testing.assert_array_equal(r.depths, [0.0, 1.0, 0.0])
    assert r.order[0] == 1


def test_equilateral_depths_zero_and_index_order():
    D = np.ones((6, 6)) - np.eye(6)
    r = metric_depth(D)
    assert np.all(r.depths == 0)
    np.testing.assert_array_equal(r.order, np.arange(6))


@pytest.mark.parametrize("seed", range(5))
def test_random_five_matches_bruteforce(seed):
    D = random_distance_matrix(np.random.default_rng(seed), 5)
    a, b = metric_depth(D), metric_depth_bruteforce(D)
    np.testing.assert_array_equal(a.depths, b.depths)
    np.testing.assert_array_equal(a.order, b.order)


@settings(max_examples=150)
@given(st.integers(3, 12), st.integers(0, 2**32), st.booleans())
def test_equals_bruteforce_property(n, seed, ties):
    D = random_distance_matrix(np.random.default_rng(seed), n, integer=ties)
    a, b = metric_depth(D), metric_depth_bruteforce(D)
    np.testing.assert_array_equal(a.depths, b.depths)
    np.testing.assert_array_equal(a.order, b.order)


@settings(max_examples=50)
@given(st.integers(3, 12), st.integers(0, 2**32), st.floats(1e-3, 1e3))
def test_relabel_and_scale_invariance(n, seed, scale):
    rng = np.random.default_rng(seed)
    D = random_distance_matrix(rng, n, integer=True)
    base = metric_depth(D).depths
    perm = rng.permutation(n)
    np.testing.assert_array_equal(metric_depth(D[np.ix_(perm, perm)]).depths, base[perm])
    np.testing.assert_array_equal(metric_depth(D * scale).depths, base)


@settings(max_examples=50)
@given(st.integers(3, 15), st.integers(0, 2**32))
def test_depth_range_and_integer_numerators(n, seed):
    D = random_distance_matrix(np.random.default_rng(seed), n)
    r = metric_depth(D)
    assert np.all((r.depths >= 0) & (r.depths <= 1))
    np.testing.assert_array_equal(np.rint(r.depths * comb(n - 1, 2)), depth_counts(D))
    np.testing.assert_array_equal(r.depths, depth_counts(D) / comb(n - 1, 2))


def test_too_few_curves():
    with pytest.raises(ValueError):
        metric_depth(np.zeros((2, 2)))


@pytest.mark.parametrize("n,alpha,k", [(350, 0.10, 315), (10, 0.5, 5), (10, 1e-9, 10), (100, 0.05, 95)])
def test_deepest_subset_sizes(n, alpha, k):
    r = metric_depth(random_distance_matrix(np.random.default_rng(n), n))
    sub = deepest_subset(r, alpha)
    assert len(sub) == k
    assert sub == r.order[:k].tolist()


def test_estimator():
    md = MetricDepth().fit(synthetic_storms(12, seed=2))
    assert md.distances_.shape == (12, 12)
    np.testing.assert_array_equal(md.depths_, metric_depth_bruteforce(md.distances_).depths)
