"""Input validation helpers shared by the estimators."""

import numbers
from math import ceil

import numpy as np

from .geodesy import gc_distance, initial_bearing, wrap_delta_bearing, STEP_HOURS

MODES = ("ar", "nonar")
LYSIS_MODES = ("logistic", "kernel")


def check_mode(mode):
    m = str(mode).lower().replace("-", "").replace("_", "")
    if m not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return m


def check_lysis(lysis):
    if lysis not in LYSIS_MODES:
        raise ValueError(f"lysis must be one of {LYSIS_MODES}, got {lysis!r}")
    return lysis


def check_alpha(alpha):
    if not isinstance(alpha, numbers.Real) or not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


def check_tracks(tracks, min_count=1):
    tracks = list(tracks)
    if len(tracks) < min_count:
        raise ValueError(f"need at least {min_count} tracks, got {len(tracks)}")
    return tracks


def check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a non-negative 64-bit integer, got {seed}")
    return seed


def track_kinematics(lat, lon):
    """Per-step bearing and speed of a position sequence.

    Element ``k`` describes the move from point ``k`` to ``k + 1``. Steps of
    zero length have no bearing; they inherit the nearest defined bearing
    (previous if any, else next), or 0 if the track never moves.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    if len(lat) < 2:
        return np.empty(0), np.empty(0)
    dist = gc_distance(lat[:-1], lon[:-1], lat[1:], lon[1:])
    speed = np.atleast_1d(dist / STEP_HOURS)
    moving = np.atleast_1d(dist > 0)
    bearing = np.full(len(speed), np.nan)
    if moving.any():
        idx = np.flatnonzero(moving)
        bearing[idx] = initial_bearing(lat[idx], lon[idx], lat[idx + 1], lon[idx + 1])
        # forward fill, then back fill the leading gap
        last = np.where(moving, np.arange(len(bearing)), -1)
        np.maximum.accumulate(last, out=last)
        have = last >= 0
        bearing[have] = bearing[last[have]]
        bearing[~have] = bearing[idx[0]]
    else:
        bearing[:] = 0.0
    return bearing, speed


def bearing_changes(bearing):
    return wrap_delta_bearing(bearing[:-1], bearing[1:])


def coverage_count(alpha, m):
    """``ceil((1 - alpha) * m)`` without floating round-up (0.9 * 350)."""
    return min(m, ceil(round((1.0 - alpha) * m, 9)))
