"""Prediction bands built from a simulated ensemble.

Four constructions share one interface: ``fit(tracks, ranking=None)``,
``contains(lat, lon)`` and ``area(resolution_km)``.

* ``KdeBand`` -- level set of a product-Gaussian KDE over all simulated
  points (pointwise).
* ``SphericalBand`` -- per-step disks around the deepest track, joined into
  a tapered tube (pointwise).
* ``ConvexHullBand`` -- hull of the deepest tracks' points (uniform).
* ``DeltaBallBand`` -- union of equal disks around the deepest tracks'
  points, radius just large enough that every disk touches another
  (uniform).

Planar work happens in a local equirectangular projection centred on the
ensemble; radii and delta are great-circle kilometres.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_tracks, coverage_count
from .depth import deepest_subset, distance_matrix, metric_depth
from .geodesy import LocalProjection, gc_distance, to_unit_vectors
from .lysis import silverman_bandwidth

BAND_TYPES = ("delta-ball", "hull", "kde", "spherical")
_KDE_CHUNK = 2_000_000


class DegenerateBandError(ValueError):
    """The ensemble cannot support the requested band."""


def ensemble_projection(tracks):
    lat = np.concatenate([t.lat for t in tracks])
    lon = np.concatenate([t.lon for t in tracks])
    return LocalProjection.centered_on(lat, lon)


def _ranking_for(tracks, ranking, threads=1):
    if ranking is None:
        ranking = metric_depth(distance_matrix(tracks, threads))
    if len(ranking) != len(tracks):
        raise ValueError("depth ranking does not match the ensemble size")
    return ranking


def raster_grid(xmin, xmax, ymin, ymax, resolution_km):
    """Cell-centre coordinates of a square grid covering a box."""
    nx = max(1, int(np.ceil((xmax - xmin) / resolution_km)))
    ny = max(1, int(np.ceil((ymax - ymin) / resolution_km)))
    xs = xmin + (np.arange(nx) + 0.5) * resolution_km
    ys = ymin + (np.arange(ny) + 0.5) * resolution_km
    return xs, ys


class _Band(BaseEstimator):
    """Shared plumbing: projection, rasterization and area."""

    kind = None

    def __init__(self, alpha=0.1):
        self.alpha = alpha

    def _setup(self, tracks):
        self.alpha_ = check_alpha(self.alpha)
        tracks = check_tracks(tracks)
        self.projection_ = ensemble_projection(tracks)
        return tracks

    def contains(self, lat, lon):
        """Boolean membership for positions in degrees."""
        check_is_fitted(self, "projection_")
        lat = np.atleast_1d(np.asarray(lat, dtype=float))
        lon = np.atleast_1d(np.asarray(lon, dtype=float))
        x, y = self.projection_.forward(lat, lon)
        return self._contains_xy(np.atleast_1d(x), np.atleast_1d(y), lat, lon)

    def predict(self, X):
        """sklearn-style alias: rows of ``(lat, lon)`` -> membership."""
        X = np.asarray(X, dtype=float)
        return self.contains(X[:, 0], X[:, 1])

    def contains_track(self, track):
        return self.contains(track.lat, track.lon)

    def _contains_xy(self, x, y, lat, lon):
        raise NotImplementedError

    def _bounds(self):
        raise NotImplementedError

    def raster(self, resolution_km):
        """``(xs, ys, mask)`` with ``mask[j, i]`` for cell ``(xs[i], ys[j])``."""
        check_is_fitted(self, "projection_")
        xs, ys = raster_grid(*self._bounds(), resolution_km)
        gx, gy = np.meshgrid(xs, ys)
        lat, lon = self.projection_.inverse(gx.ravel(), gy.ravel())
        inside = self._contains_xy(gx.ravel(), gy.ravel(), np.atleast_1d(lat), np.atleast_1d(lon))
        return xs, ys, inside.reshape(gx.shape)

    def area(self, resolution_km):
        """Band area in km^2 by counting raster cell centres inside."""
        _, _, mask = self.raster(resolution_km)
        return float(mask.sum()) * resolution_km**2


class KdeBand(_Band):
    """Highest-density region of a product-Gaussian KDE."""

    kind = "kde"

    def fit(self, tracks, ranking=None):
        tracks = self._setup(tracks)
        lat = np.concatenate([t.lat for t in tracks])
        lon = np.concatenate([t.lon for t in tracks])
        if len(lat) < 10:
            raise DegenerateBandError("KDE band needs at least 10 simulated points")
        x, y = self.projection_.forward(lat, lon)
        self.sample_xy_ = np.column_stack([x, y])
        bw = np.array([silverman_bandwidth(x), silverman_bandwidth(y)])
        # a degenerate axis still needs a positive bandwidth
        self.bandwidths_ = np.where(bw > 0, bw, 1e-3)
        dens = np.sort(self.density(x, y))
        self.sample_density_ = dens
        self.threshold_ = float(dens[int(np.floor(self.alpha_ * len(dens)))])
        return self

    def density(self, x, y):
        """KDE value at projected coordinates."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        hx, hy = self.bandwidths_
        sx = self.sample_xy_[:, 0] / hx
        sy = self.sample_xy_[:, 1] / hy
        n = len(sx)
        out = np.empty(len(x))
        step = max(1, _KDE_CHUNK // n)
        for a in range(0, len(x), step):
            dx = x[a:a + step, None] / hx - sx
            dy = y[a:a + step, None] / hy - sy
            out[a:a + step] = np.exp(-0.5 * (dx * dx + dy * dy)).sum(axis=1)
        return out / (n * 2.0 * np.pi * hx * hy)

    def _contains_xy(self, x, y, lat, lon):
        return self.density(x, y) >= self.threshold_

    def _bounds(self):
        pad = 3.0 * self.bandwidths_
        lo = self.sample_xy_.min(axis=0) - pad
        hi = self.sample_xy_.max(axis=0) + pad
        return lo[0], hi[0], lo[1], hi[1]


def _capsule_gap(qx, qy, cx, cy, r):
    """Minimum over s of ``|q - c(s)| - r(s)`` for each tapered segment.

    ``c`` and ``r`` are interpolated linearly along consecutive centres; the
    objective is convex in s so the clipped stationary point plus the two
    endpoints bound it exactly. Returns shape ``(len(q), len(c) - 1)``.
    """
    ax = cx[None, :-1] - qx[:, None]
    ay = cy[None, :-1] - qy[:, None]
    bx, by = np.diff(cx)[None, :], np.diff(cy)[None, :]
    dr = np.diff(r)[None, :]
    r0 = r[None, :-1]
    bb = bx * bx + by * by
    ab = ax * bx + ay * by
    aa = ax * ax + ay * ay

    def g(s):
        ux, uy = ax + s * bx, ay + s * by
        return np.sqrt(ux * ux + uy * uy) - (r0 + s * dr)

    best = np.minimum(g(0.0), g(1.0))
    proper = bb > dr * dr
    with np.errstate(divide="ignore", invalid="ignore"):
        s0 = np.where(bb > 0, -ab / bb, 0.0)
        h = np.sqrt(np.maximum(aa - np.where(bb > 0, ab * ab / bb, 0.0), 0.0))
        shift = np.where(proper, h * dr / np.sqrt(bb * np.maximum(bb - dr * dr, 1e-300)), 0.0)
    s_star = np.clip(np.where(proper, s0 + shift, 0.0), 0.0, 1.0)
    return np.minimum(best, g(s_star))


class SphericalBand(_Band):
    """Tube of per-step disks around the deepest simulated track."""

    kind = "spherical"

    def fit(self, tracks, ranking=None):
        tracks = self._setup(tracks)
        if len(tracks) < 3:
            raise DegenerateBandError("spherical band needs at least 3 tracks")
        ranking = _ranking_for(tracks, ranking)
        c = int(ranking.order[0])
        center = tracks[c]
        others = [t for i, t in enumerate(tracks) if i != c]
        radii = np.zeros(len(center))
        alive_counts = np.zeros(len(center), dtype=int)
        self.carried_steps_ = []
        for t in range(len(center)):
            pts = [(o.lat[t], o.lon[t]) for o in others if len(o) > t]
            alive_counts[t] = len(pts)
            if not pts:
                radii[t] = radii[t - 1] if t else 0.0
                self.carried_steps_.append(t)
                continue
            p = np.array(pts)
            d = np.sort(np.atleast_1d(gc_distance(center.lat[t], center.lon[t], p[:, 0], p[:, 1])))
            radii[t] = d[coverage_count(self.alpha_, len(d)) - 1]
        self.center_index_ = c
        self.center_lat_ = center.lat.copy()
        self.center_lon_ = center.lon.copy()
        self.radii_ = radii
        self.alive_counts_ = alive_counts
        self._project_center()
        return self

    def _project_center(self):
        cx, cy = self.projection_.forward(self.center_lat_, self.center_lon_)
        self._cx, self._cy = np.atleast_1d(cx), np.atleast_1d(cy)

    def _contains_xy(self, x, y, lat, lon):
        cx, cy, r = self._cx, self._cy, self.radii_
        dx = x[:, None] - cx[None, :]
        dy = y[:, None] - cy[None, :]
        inside = np.any(np.sqrt(dx * dx + dy * dy) <= r[None, :], axis=1)
        if len(cx) > 1:
            inside |= np.any(_capsule_gap(x, y, cx, cy, r) <= 1e-9, axis=1)
        return inside

    def _bounds(self):
        pad = self.radii_.max() + 1e-6
        return (self._cx.min() - pad, self._cx.max() + pad,
                self._cy.min() - pad, self._cy.max() + pad)


def monotone_chain(points):
    """Counter-clockwise convex hull with collinear vertices removed."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float))))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def shoelace_area(vertices):
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def in_convex_polygon(vertices, x, y, tol=0.0):
    """Boundary-inclusive test against a counter-clockwise convex polygon."""
    v = np.asarray(vertices, dtype=float)
    a, b = v, np.roll(v, -1, axis=0)
    ex, ey = (b - a)[:, 0], (b - a)[:, 1]
    cr = ex[None, :] * (y[:, None] - a[None, :, 1]) - ey[None, :] * (x[:, None] - a[None, :, 0])
    return np.all(cr >= -tol * np.hypot(ex, ey)[None, :], axis=1)


class ConvexHullBand(_Band):
    """Convex hull of every point of the deepest tracks."""

    kind = "hull"

    def fit(self, tracks, ranking=None):
        tracks = self._setup(tracks)
        ranking = _ranking_for(tracks, ranking)
        keep = deepest_subset(ranking, self.alpha_)
        lat = np.concatenate([tracks[i].lat for i in keep])
        lon = np.concatenate([tracks[i].lon for i in keep])
        x, y = self.projection_.forward(lat, lon)
        hull = monotone_chain(np.column_stack([x, y]))
        if len(hull) < 3:
            raise DegenerateBandError("deepest-subset points are collinear; hull is degenerate")
        self.vertices_ = hull
        self.subset_ = keep
        return self

    def _contains_xy(self, x, y, lat, lon):
        # tolerance in km absorbs round-off for points on the hull boundary
        return in_convex_polygon(self.vertices_, x, y, tol=1e-9)

    def _bounds(self):
        lo, hi = self.vertices_.min(axis=0), self.vertices_.max(axis=0)
        return lo[0], hi[0], lo[1], hi[1]

    def area(self, resolution_km=None):
        """Exact polygon area in km^2; the resolution is ignored."""
        check_is_fitted(self, "vertices_")
        return shoelace_area(self.vertices_)


class DeltaBallBand(_Band):
    """Union of equal great-circle disks around the deepest tracks' points."""

    kind = "delta-ball"

    def fit(self, tracks, ranking=None):
        tracks = self._setup(tracks)
        ranking = _ranking_for(tracks, ranking)
        keep = deepest_subset(ranking, self.alpha_)
        lat = np.concatenate([tracks[i].lat for i in keep])
        lon = np.concatenate([tracks[i].lon for i in keep])
        self.subset_ = keep
        self._set_centers(lat, lon)
        self.delta_ = 0.5 * float(self.nn_distances_.max())
        return self

    @classmethod
    def from_params(cls, center_lat, center_lon, delta, alpha=0.1, projection=None):
        """Rebuild a band from stored centres and radius."""
        band = cls(alpha=alpha)
        band.alpha_ = check_alpha(alpha)
        band.projection_ = projection or LocalProjection.centered_on(center_lat, center_lon)
        band.subset_ = []
        band._set_centers(np.asarray(center_lat, float), np.asarray(center_lon, float))
        band.delta_ = float(delta)
        return band

    def _set_centers(self, lat, lon):
        if len(lat) < 2:
            raise DegenerateBandError("delta-ball band needs at least 2 centres")
        self.center_lat_, self.center_lon_ = lat, lon
        self._tree = cKDTree(to_unit_vectors(lat, lon))
        _, idx = self._tree.query(self._tree.data, k=2)
        own = np.arange(len(lat))
        nn = np.where(idx[:, 0] == own, idx[:, 1], idx[:, 0])
        self.nn_distances_ = np.atleast_1d(gc_distance(lat, lon, lat[nn], lon[nn]))

    def nearest_center_distance(self, lat, lon):
        _, idx = self._tree.query(to_unit_vectors(lat, lon), k=1)
        return np.atleast_1d(gc_distance(lat, lon, self.center_lat_[idx], self.center_lon_[idx]))

    def _contains_xy(self, x, y, lat, lon):
        return self.nearest_center_distance(lat, lon) <= self.delta_

    def _bounds(self):
        x, y = self.projection_.forward(self.center_lat_, self.center_lon_)
        # projected disks are slightly distorted; pad generously
        pad = 1.1 * self.delta_ + 1e-6
        return x.min() - pad, x.max() + pad, y.min() - pad, y.max() + pad


BAND_CLASSES = {
    "kde": KdeBand,
    "spherical": SphericalBand,
    "hull": ConvexHullBand,
    "delta-ball": DeltaBallBand,
}


def make_band(kind, alpha=0.1):
    try:
        return BAND_CLASSES[kind](alpha=alpha)
    except KeyError:
        raise ValueError(f"unknown band type {kind!r}; choose from {BAND_TYPES}") from None


def band_kde(tracks, alpha):
    return KdeBand(alpha).fit(tracks)


def band_spherical(tracks, ranking, alpha):
    return SphericalBand(alpha).fit(tracks, ranking)


def band_convex_hull(tracks, ranking, alpha):
    return ConvexHullBand(alpha).fit(tracks, ranking)


def band_delta_ball(tracks, ranking, alpha):
    return DeltaBallBand(alpha).fit(tracks, ranking)


def band_area(band, resolution_km):
    return band.area(resolution_km)


def band_contains(band, lat, lon):
    return band.contains(lat, lon)
