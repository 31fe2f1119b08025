"""Block-wise linear models for change in bearing and change in speed.

Each 10-degree latitude/longitude square gets its own pair of regressions
when it holds enough training rows; everything else falls back to a pair
fitted on all rows. Stochastic prediction adds a residual drawn uniformly
from the fitted model's residual pool.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    bearing_changes,
    check_mode,
    check_tracks,
    track_kinematics,
)
from .geodesy import wrap_delta_bearing

BLOCK_DEG = 10.0
RANK_FALLBACK_RIDGE = 1e-6

# dense lookup grid covering every possible block
_LAT_BANDS = np.arange(-9, 10)
_LON_BANDS = np.arange(-18, 19)


@dataclass(frozen=True, order=True)
class BlockIndex:
    lat_band: int
    lon_band: int

    @property
    def bounds(self):
        """``((lat_lo, lat_hi), (lon_lo, lon_hi))``, half-open."""
        return (
            (BLOCK_DEG * self.lat_band, BLOCK_DEG * self.lat_band + BLOCK_DEG),
            (BLOCK_DEG * self.lon_band, BLOCK_DEG * self.lon_band + BLOCK_DEG),
        )


def block_index(lat, lon) -> BlockIndex:
    return BlockIndex(math.floor(lat / BLOCK_DEG), math.floor(lon / BLOCK_DEG))


def block_bands(lat, lon):
    """Vectorized :func:`block_index`; returns two integer arrays."""
    return (
        np.floor(np.asarray(lat) / BLOCK_DEG).astype(int),
        np.floor(np.asarray(lon) / BLOCK_DEG).astype(int),
    )


@dataclass(frozen=True)
class StepFeatures:
    lat: float
    lon: float
    bearing: float
    speed: float
    lag_dbearing: float | None = None
    lag_dspeed: float | None = None

    @property
    def is_ar(self):
        return self.lag_dbearing is not None


@dataclass(frozen=True)
class DesignRow:
    block: BlockIndex
    features: StepFeatures
    target_dbearing: float
    target_dspeed: float


def build_design_rows(track, mode) -> list[DesignRow]:
    """Regression rows for one track.

    Row ``i`` uses the position at point ``i`` and the bearing/speed of the
    move into it; the targets are the changes into the following move. AR
    rows also carry the previous change, so they start one point later.
    """
    mode = check_mode(mode)
    need = 4 if mode == "ar" else 3
    if len(track) < need:
        return []
    bearing, speed = track_kinematics(track.lat, track.lon)
    dbear = bearing_changes(bearing)
    dspeed = np.diff(speed)
    rows = []
    first = 2 if mode == "ar" else 1
    for i in range(first, len(track) - 1):
        lag_b = lag_s = None
        if mode == "ar":
            lag_b, lag_s = float(dbear[i - 2]), float(dspeed[i - 2])
        f = StepFeatures(
            float(track.lat[i]),
            float(track.lon[i]),
            float(bearing[i - 1]),
            float(speed[i - 1]),
            lag_b,
            lag_s,
        )
        rows.append(
            DesignRow(block_index(f.lat, f.lon), f, float(dbear[i - 1]), float(dspeed[i - 1]))
        )
    return rows


def feature_matrix(rows, target):
    """Design matrix (without intercept) for the bearing or speed model.

    The AR bearing model adds the lagged bearing change; the AR speed model
    adds the lagged speed change.
    """
    cols = [[r.features.lat, r.features.lon, r.features.bearing, r.features.speed] for r in rows]
    if rows and rows[0].features.is_ar:
        lag = "lag_dbearing" if target == "bearing" else "lag_dspeed"
        for c, r in zip(cols, rows):
            c.append(getattr(r.features, lag))
    return np.asarray(cols, dtype=float).reshape(len(rows), -1)


@dataclass
class LinearModel:
    coefficients: np.ndarray
    residual_pool: np.ndarray
    ridge: float = 0.0
    fallback: bool = False

    @property
    def n_obs(self):
        return len(self.residual_pool)

    def predict(self, X):
        X = np.atleast_2d(X)
        return self.coefficients[0] + X @ self.coefficients[1:]


def fit_ols(X, y, ridge=0.0) -> LinearModel:
    """Least squares with an unpenalized intercept column prepended to `X`.

    Minimizes ``||y - X b||^2 + ridge * ||b[1:]||^2``. A rank-deficient
    system with ``ridge == 0`` is refit with a tiny ridge and flagged.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1:
        raise ValueError("fit_ols needs at least one row")
    A = np.column_stack([np.ones(len(X)), X])
    fallback = False
    if ridge == 0.0 and np.linalg.matrix_rank(A) < A.shape[1]:
        warnings.warn("rank-deficient design; refitting with ridge=1e-6", RuntimeWarning)
        ridge, fallback = RANK_FALLBACK_RIDGE, True
    if ridge == 0.0:
        beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    else:
        penalty = np.eye(A.shape[1]) * ridge
        penalty[0, 0] = 0.0
        beta = np.linalg.solve(A.T @ A + penalty, A.T @ y)
    resid = y - A @ beta
    return LinearModel(beta, resid, float(ridge), fallback)


class BlockRegression(BaseEstimator):
    """Per-block regressions for change in bearing and speed.

    Parameters
    ----------
    mode : {"ar", "nonar"}
        Whether the models carry a lagged-change term.
    min_block_obs : int or float
        Minimum rows for a block to get its own models; ``math.inf``
        disables block models entirely.
    ridge : float
        Penalty on non-intercept coefficients.
    """

    def __init__(self, mode="ar", min_block_obs=20, ridge=0.0):
        self.mode = mode
        self.min_block_obs = min_block_obs
        self.ridge = ridge

    def fit(self, tracks, y=None):
        mode = check_mode(self.mode)
        tracks = check_tracks(tracks)
        rows = [r for t in tracks for r in build_design_rows(t, mode)]
        if not rows:
            raise ValueError("no usable design rows in the training tracks")
        self.mode_ = mode
        self.global_ = self._fit_pair(rows)
        by_block = {}
        for r in rows:
            by_block.setdefault(r.block, []).append(r)
        self.per_block_ = {
            b: self._fit_pair(rs)
            for b, rs in sorted(by_block.items())
            if len(rs) >= self.min_block_obs
        }
        self.n_rows_ = len(rows)
        self._build_lookup()
        return self

    def _fit_pair(self, rows):
        yb = [r.target_dbearing for r in rows]
        ys = [r.target_dspeed for r in rows]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return (
                fit_ols(feature_matrix(rows, "bearing"), yb, self.ridge),
                fit_ols(feature_matrix(rows, "speed"), ys, self.ridge),
            )

    def _build_lookup(self):
        # model slot 0 is the global pair; block pairs follow in sorted order
        pairs = [self.global_] + list(self.per_block_.values())
        grid = np.zeros((len(_LAT_BANDS), len(_LON_BANDS)), dtype=int)
        for k, b in enumerate(self.per_block_, start=1):
            grid[b.lat_band - _LAT_BANDS[0], b.lon_band - _LON_BANDS[0]] = k
        self._slot_grid = grid
        self._coef = {
            "bearing": np.stack([p[0].coefficients for p in pairs]),
            "speed": np.stack([p[1].coefficients for p in pairs]),
        }
        self._pools = {}
        for j, name in enumerate(("bearing", "speed")):
            sizes = np.array([p[j].n_obs for p in pairs])
            self._pools[name] = (
                np.concatenate([p[j].residual_pool for p in pairs]),
                np.concatenate([[0], np.cumsum(sizes)[:-1]]),
                sizes,
            )

    def slots(self, lat, lon):
        """Model slot per position: 0 for the global pair, else a block pair."""
        check_is_fitted(self, "global_")
        lb, ob = block_bands(lat, lon)
        lb = np.clip(lb - _LAT_BANDS[0], 0, len(_LAT_BANDS) - 1)
        ob = np.clip(ob - _LON_BANDS[0], 0, len(_LON_BANDS) - 1)
        return self._slot_grid[lb, ob]

    def model_for(self, lat, lon):
        """The (bearing, speed) model pair used at a position."""
        check_is_fitted(self, "global_")
        return self.per_block_.get(block_index(lat, lon), self.global_)

    def predict_mean(self, lat, lon, bearing, speed, lag_dbearing=None, lag_dspeed=None):
        """Deterministic linear predictions ``(dbearing, dspeed)``.

        Inputs are equal-length arrays; coefficients come from each
        position's own block. The sum is accumulated term by term so that a
        member's result never depends on how many others share the batch.
        """
        slot = self.slots(lat, lon)
        base = [np.asarray(v, dtype=float) for v in (lat, lon, bearing, speed)]
        out = []
        for name, lag in (("bearing", lag_dbearing), ("speed", lag_dspeed)):
            coef = self._coef[name][slot]
            feats = base + ([np.asarray(lag, dtype=float)] if self.mode_ == "ar" else [])
            acc = coef[..., 0].copy()
            for k, v in enumerate(feats, start=1):
                acc = acc + coef[..., k] * v
            out.append(acc)
        return out[0], out[1]

    def draw_residuals(self, slot, u_bearing, u_speed):
        """Residuals picked from each slot's pools by uniforms in [0, 1)."""
        res = []
        for name, u in (("bearing", u_bearing), ("speed", u_speed)):
            pool, offset, size = self._pools[name]
            k = np.minimum((np.asarray(u) * size[slot]).astype(int), size[slot] - 1)
            res.append(pool[offset[slot] + k])
        return res[0], res[1]

    def predict_deltas(self, features: StepFeatures, rng):
        """One stochastic ``(dbearing, dspeed)`` draw for a single step."""
        f = features
        lag_b = [f.lag_dbearing] if self.mode_ == "ar" else None
        lag_s = [f.lag_dspeed] if self.mode_ == "ar" else None
        mb, ms = self.predict_mean([f.lat], [f.lon], [f.bearing], [f.speed], lag_b, lag_s)
        slot = self.slots([f.lat], [f.lon])
        u = rng.random(2)
        rb, rs = self.draw_residuals(slot, u[:1], u[1:])
        db = wrap_delta_bearing(0.0, float(mb[0] + rb[0]))
        return db, float(ms[0] + rs[0])
