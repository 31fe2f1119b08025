"""Curve distances and metric depth of simulated tracks.

Depth of curve ``i`` is the fraction of pairs ``{j, k}`` of the other curves
for which ``D[j, k]`` is strictly larger than both ``D[i, j]`` and
``D[i, k]``, i.e. how often ``i`` sits between a random pair.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_alpha, coverage_count
from .geodesy import gc_distance, to_unit_vectors


@dataclass(frozen=True)
class DepthRanking:
    depths: np.ndarray
    order: np.ndarray

    def __len__(self):
        return len(self.depths)


def _mean_min(lat_a, lon_a, vec_a, lat_b, lon_b, vec_b):
    # nearest neighbour by maximal dot product, exact distance afterwards
    nearest = np.argmax(vec_a @ vec_b.T, axis=1)
    return gc_distance(lat_a, lon_a, lat_b[nearest], lon_b[nearest]).mean()


def curve_distance(a, b):
    """Symmetrized mean of nearest-point great-circle distances, in km."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("curve_distance needs non-empty tracks")
    va, vb = to_unit_vectors(a.lat, a.lon), to_unit_vectors(b.lat, b.lon)
    ab = _mean_min(a.lat, a.lon, va, b.lat, b.lon, vb)
    ba = _mean_min(b.lat, b.lon, vb, a.lat, a.lon, va)
    return 0.5 * (float(ab) + float(ba))


def _directed_rows(rows, padded, lengths):
    """Mean nearest distance from each track in `rows` to every track."""
    plat, plon, pvec = padded
    n, width = plat.shape
    flat = pvec.reshape(-1, 3).T
    out = np.zeros((len(rows), n))
    for r, i in enumerate(rows):
        m = lengths[i]
        dots = (pvec[i, :m] @ flat).reshape(m, n, width)
        best = np.argmax(dots, axis=2)
        cols = np.arange(n)
        d = gc_distance(
            plat[i, :m, None], plon[i, :m, None], plat[cols, best], plon[cols, best]
        )
        out[r] = d.mean(axis=0)
    return out


def _pad(tracks, lengths):
    # short tracks repeat their last point, which never changes a nearest distance
    n, width = len(tracks), int(lengths.max())
    plat = np.empty((n, width))
    plon = np.empty((n, width))
    for i, t in enumerate(tracks):
        plat[i, : len(t)] = t.lat
        plat[i, len(t):] = t.lat[-1]
        plon[i, : len(t)] = t.lon
        plon[i, len(t):] = t.lon[-1]
    pvec = to_unit_vectors(plat.ravel(), plon.ravel()).reshape(n, width, 3)
    return plat, plon, pvec


def distance_matrix(tracks, threads=1):
    """All pairwise :func:`curve_distance` values as a symmetric matrix."""
    tracks = list(tracks)
    n = len(tracks)
    if n == 0:
        raise ValueError("distance_matrix needs at least one track")
    lengths = np.array([len(t) for t in tracks])
    if np.any(lengths == 0):
        raise ValueError("distance_matrix needs non-empty tracks")
    padded = _pad(tracks, lengths)
    chunks = [c for c in np.array_split(np.arange(n), max(1, min(threads, n))) if len(c)]
    if len(chunks) == 1:
        parts = [_directed_rows(chunks[0], padded, lengths)]
    else:
        with ThreadPoolExecutor(len(chunks)) as pool:
            parts = list(pool.map(
                lambda c: _directed_rows(c, padded, lengths), chunks
            ))
    directed = np.vstack(parts)
    D = 0.5 * (directed + directed.T)
    np.fill_diagonal(D, 0.0)
    return D


def _rank(depths):
    # stable sort on negated depth breaks ties by lower index
    order = np.argsort(-depths, kind="stable")
    return DepthRanking(depths, order)


def depth_counts(D):
    """Integer betweenness counts per curve."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        row = D[i]
        # pairs touching i or with j == k can never satisfy the strict test
        between = D > np.maximum.outer(row, row)
        counts[i] = np.count_nonzero(np.triu(between, 1))
    return counts


def metric_depth(D) -> DepthRanking:
    """Metric depth of every curve from a distance matrix (n >= 3)."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if D.shape != (n, n):
        raise ValueError("distance matrix must be square")
    if n < 3:
        raise ValueError("metric depth needs at least 3 curves")
    return _rank(depth_counts(D) / comb(n - 1, 2))


def metric_depth_bruteforce(D) -> DepthRanking:
    """Triple-loop reference implementation of :func:`metric_depth`."""
    n = len(D)
    if n < 3:
        raise ValueError("metric depth needs at least 3 curves")
    depths = np.zeros(n)
    for i in range(n):
        c = 0
        for j in range(n):
            for k in range(j + 1, n):
                if j == i or k == i:
                    continue
                if D[j][k] > max(D[i][j], D[i][k]):
                    c += 1
        depths[i] = c / comb(n - 1, 2)
    return _rank(depths)


def deepest_subset(ranking, alpha):
    """Indices of the ``ceil((1 - alpha) n)`` deepest curves."""
    alpha = check_alpha(alpha)
    k = coverage_count(alpha, len(ranking))
    return [int(i) for i in ranking.order[:k]]


class MetricDepth(BaseEstimator):
    """Estimator form: ``fit(tracks)`` sets ``distances_``, ``depths_``, ``order_``."""

    def __init__(self, threads=1):
        self.threads = threads

    def fit(self, tracks, y=None):
        self.distances_ = distance_matrix(tracks, self.threads)
        self.ranking_ = metric_depth(self.distances_)
        self.depths_ = self.ranking_.depths
        self.order_ = self.ranking_.order
        return self
