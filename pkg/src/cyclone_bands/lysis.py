"""Storm death (lysis) models.

``LogisticLysis`` gives a per-step death probability from position, bearing
and speed, with one penalized logistic regression per 10-degree block.
``KernelLifespan`` draws whole-storm lengths from a Gaussian-smoothed
empirical distribution of training lifespans.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_tracks, track_kinematics
from .track_models import _LAT_BANDS, _LON_BANDS, BlockIndex, block_bands

BANDWIDTH_FLOOR = 0.5


def lysis_rows(track):
    """Features ``(lat, lon, bearing, speed)`` at points 1..n-1 and labels.

    The final point of the storm is labelled 1, every other row 0.
    """
    if len(track) < 2:
        return np.empty((0, 4)), np.empty(0)
    bearing, speed = track_kinematics(track.lat, track.lon)
    X = np.column_stack([track.lat[1:], track.lon[1:], bearing, speed])
    y = np.zeros(len(X))
    y[-1] = 1.0
    return X, y


def fit_logistic(X, y, ridge=0.0, max_iter=50, tol=1e-8):
    """Penalized logistic regression by iteratively reweighted least squares.

    An intercept is prepended. The objective is the negative log-likelihood
    plus ``ridge / 2 * ||beta[1:]||^2``.

    Returns ``(beta, converged, n_iter)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([np.ones(len(X)), X])
    p = A.shape[1]
    penalty = np.full(p, float(ridge))
    penalty[0] = 0.0
    beta = np.zeros(p)
    for it in range(1, max_iter + 1):
        mu = expit(A @ beta)
        w = mu * (1.0 - mu)
        grad = A.T @ (y - mu) - penalty * beta
        H = (A * w[:, None]).T @ A + np.diag(penalty)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            return beta, False, it
        if np.max(np.abs(step)) < tol:
            return beta, True, it
    return beta, False, max_iter


def fit_logistic_escalating(X, y, ridge, max_iter=50, tol=1e-8, max_escalations=12):
    """Fit, multiplying the ridge by 10 after each non-converged attempt.

    Returns ``(beta, ridge_used, escalated)``.
    """
    r = float(ridge)
    for k in range(max_escalations + 1):
        beta, ok, _ = fit_logistic(X, y, r, max_iter, tol)
        if ok:
            return beta, r, k > 0
        r = r * 10.0 if r > 0 else 1e-6
    raise RuntimeError("logistic fit did not converge even after ridge escalation")


class LogisticLysis(BaseEstimator):
    """Block-specific logistic death model with a global fallback."""

    def __init__(self, min_block_obs=20, ridge=1e-4, max_iter=50, tol=1e-8):
        self.min_block_obs = min_block_obs
        self.ridge = ridge
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, tracks, y=None):
        tracks = check_tracks(tracks)
        parts = [lysis_rows(t) for t in tracks]
        X = np.concatenate([p[0] for p in parts])
        labels = np.concatenate([p[1] for p in parts])
        if len(X) == 0:
            raise ValueError("no usable lysis rows in the training tracks")
        self.flags_ = []
        self.global_, r, esc = fit_logistic_escalating(X, labels, self.ridge, self.max_iter, self.tol)
        if esc:
            self.flags_.append(("global", r))
        lb, ob = block_bands(X[:, 0], X[:, 1])
        self.per_block_ = {}
        for key in sorted(set(zip(lb.tolist(), ob.tolist()))):
            mask = (lb == key[0]) & (ob == key[1])
            yb = labels[mask]
            if mask.sum() < self.min_block_obs or yb.min() == yb.max():
                continue
            beta, r, esc = fit_logistic_escalating(X[mask], yb, self.ridge, self.max_iter, self.tol)
            if esc:
                self.flags_.append((key, r))
            self.per_block_[BlockIndex(*key)] = beta
        self._build_lookup()
        return self

    def _build_lookup(self):
        grid = np.zeros((len(_LAT_BANDS), len(_LON_BANDS)), dtype=int)
        for k, b in enumerate(self.per_block_, start=1):
            grid[b.lat_band - _LAT_BANDS[0], b.lon_band - _LON_BANDS[0]] = k
        self._slot_grid = grid
        self._coef = np.stack([self.global_] + list(self.per_block_.values()))

    def predict_proba(self, X):
        """Death probability for rows ``(lat, lon, bearing, speed)``.

        Extra trailing columns are ignored.
        """
        check_is_fitted(self, "global_")
        X = check_array(X, ensure_min_samples=0)[:, :4]
        lb, ob = block_bands(X[:, 0], X[:, 1])
        slot = self._slot_grid[
            np.clip(lb - _LAT_BANDS[0], 0, len(_LAT_BANDS) - 1),
            np.clip(ob - _LON_BANDS[0], 0, len(_LON_BANDS) - 1),
        ]
        coef = self._coef[slot]
        eta = coef[:, 0].copy()
        for k in range(4):
            eta = eta + coef[:, k + 1] * X[:, k]
        return expit(eta)


def silverman_bandwidth(values):
    """``0.9 * min(sd, IQR / 1.34) * n ** (-1/5)``; sd uses ddof=1."""
    v = np.asarray(values, dtype=float)
    sd = v.std(ddof=1)
    q75, q25 = np.percentile(v, [75, 25])
    return 0.9 * min(sd, (q75 - q25) / 1.34) * len(v) ** (-0.2)


class KernelLifespan(BaseEstimator):
    """Smoothed-bootstrap sampler of storm lengths (in points).

    Parameters
    ----------
    max_steps : int
        Upper clamp on sampled lifespans.
    bandwidth : float or None
        Fixed kernel bandwidth; ``None`` uses Silverman's rule.
    """

    def __init__(self, max_steps=120, bandwidth=None):
        self.max_steps = max_steps
        self.bandwidth = bandwidth

    def fit(self, tracks, y=None):
        tracks = check_tracks(tracks, min_count=2)
        self.lifespans_ = np.array([len(t) for t in tracks], dtype=int)
        if self.bandwidth is not None:
            self.bandwidth_ = float(self.bandwidth)
        else:
            h = silverman_bandwidth(self.lifespans_)
            self.bandwidth_ = h if h > 0 else BANDWIDTH_FLOOR
        return self

    def sample(self, rng, size=None, max_steps=None):
        """Draw one lifespan, or an array of `size` lifespans."""
        check_is_fitted(self, "lifespans_")
        hi = self.max_steps if max_steps is None else max_steps
        n = 1 if size is None else size
        idx = rng.integers(0, len(self.lifespans_), size=n)
        noise = rng.standard_normal(n)
        draws = np.rint(self.lifespans_[idx] + noise * self.bandwidth_).astype(int)
        draws = np.clip(draws, 4, hi)
        return int(draws[0]) if size is None else draws
