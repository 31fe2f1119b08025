"""Spherical-earth primitives.

Distances are kilometres, speeds km/h and bearings degrees clockwise from
true north. Every function accepts scalars or numpy arrays and broadcasts.
"""

import numpy as np

EARTH_RADIUS_KM = 6371.0088
STEP_HOURS = 6.0


def normalize_lon(lon):
    """Wrap longitudes into [-180, 180)."""
    lon = np.asarray(lon, dtype=float)
    # in-range values pass through untouched to avoid rounding drift
    inside = (lon >= -180.0) & (lon < 180.0)
    wrapped = np.where(inside, lon, np.mod(lon + 180.0, 360.0) - 180.0)
    return wrapped if np.ndim(wrapped) else float(wrapped)


def gc_distance(lat1, lon1, lat2, lon2):
    """Great-circle (haversine) distance in kilometres."""
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlam = np.radians(np.subtract(lon2, lon1))
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    d = 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))
    return d if np.ndim(d) else float(d)


def _raw_bearing(lat1, lon1, lat2, lon2):
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dlam = np.radians(np.subtract(lon2, lon1))
    y = np.sin(dlam) * np.cos(phi2)
    x = np.cos(phi1) * np.sin(phi2) - np.sin(phi1) * np.cos(phi2) * np.cos(dlam)
    return np.mod(np.degrees(np.arctan2(y, x)), 360.0)


def initial_bearing(lat1, lon1, lat2, lon2):
    """Initial great-circle bearing from point 1 toward point 2, in [0, 360).

    Raises ValueError when the two points coincide, since the direction is
    undefined there.
    """
    same = (np.asarray(lat1) == np.asarray(lat2)) & (
        normalize_lon(lon1) == normalize_lon(lon2)
    )
    if np.any(same):
        raise ValueError("bearing is undefined between identical points")
    b = _raw_bearing(lat1, lon1, lat2, lon2)
    # mod can return 360.0 for tiny negative angles
    b = np.where(b >= 360.0, 0.0, b)
    return b if np.ndim(b) else float(b)


def destination(lat, lon, bearing, distance_km):
    """Point reached by travelling `distance_km` along a great circle.

    Returns ``(lat, lon)`` with longitude wrapped to [-180, 180).
    """
    phi1 = np.radians(lat)
    theta = np.radians(bearing)
    delta = np.asarray(distance_km, dtype=float) / EARTH_RADIUS_KM
    sin_phi2 = np.sin(phi1) * np.cos(delta) + np.cos(phi1) * np.sin(delta) * np.cos(theta)
    phi2 = np.arcsin(np.clip(sin_phi2, -1.0, 1.0))
    lam = np.arctan2(
        np.sin(theta) * np.sin(delta) * np.cos(phi1),
        np.cos(delta) - np.sin(phi1) * sin_phi2,
    )
    lat2 = np.degrees(phi2)
    lon2 = normalize_lon(np.add(lon, np.degrees(lam)))
    # zero distance must return the start point exactly
    zero = delta == 0
    lat2 = np.where(zero, lat, lat2)
    lon2 = np.where(zero, normalize_lon(lon), lon2)
    if np.ndim(lat2) == 0:
        return float(lat2), float(lon2)
    return lat2, lon2


def step_speed(lat1, lon1, lat2, lon2, hours=STEP_HOURS):
    """Mean speed in km/h between two observations `hours` apart."""
    return gc_distance(lat1, lon1, lat2, lon2) / hours


def wrap_delta_bearing(prev, nxt):
    """Signed minimal angular difference ``nxt - prev`` in (-180, 180]."""
    d = 180.0 - np.mod(180.0 - (np.subtract(nxt, prev)), 360.0)
    return d if np.ndim(d) else float(d)


def to_unit_vectors(lat, lon):
    """Cartesian unit vectors, shape ``(n, 3)``, for nearest-neighbour work."""
    phi = np.radians(np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    cphi = np.cos(phi)
    return np.column_stack([cphi * np.cos(lam), cphi * np.sin(lam), np.sin(phi)])


class LocalProjection:
    """Equirectangular projection to kilometres around ``(lat0, lon0)``."""

    def __init__(self, lat0, lon0):
        self.lat0 = float(lat0)
        self.lon0 = float(lon0)
        self._ky = EARTH_RADIUS_KM * np.pi / 180.0
        self._kx = self._ky * np.cos(np.radians(self.lat0))

    @classmethod
    def centered_on(cls, lat, lon):
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        lam = np.radians(lon)
        lon0 = float(np.degrees(np.arctan2(np.sin(lam).mean(), np.cos(lam).mean())))
        return cls(lat.mean(), lon0)

    def forward(self, lat, lon):
        dlon = normalize_lon(np.subtract(lon, self.lon0))
        x = self._kx * np.asarray(dlon, dtype=float)
        y = self._ky * (np.asarray(lat, dtype=float) - self.lat0)
        return x, y

    def inverse(self, x, y):
        lat = self.lat0 + np.asarray(y, dtype=float) / self._ky
        lon = normalize_lon(self.lon0 + np.asarray(x, dtype=float) / self._kx)
        return lat, lon
