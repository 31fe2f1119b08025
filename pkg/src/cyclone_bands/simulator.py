"""Stochastic track propagation from a storm's first observations.

Every ensemble member owns a random stream seeded from
``(master_seed, member index)``. All of a member's randomness is drawn up
front from that stream, so members can be propagated in any batch size or
thread layout and still come out bit-identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    bearing_changes,
    check_lysis,
    check_mode,
    check_seed,
    check_tracks,
    track_kinematics,
)
from .geodesy import STEP_HOURS, destination, wrap_delta_bearing
from .lysis import KernelLifespan, LogisticLysis
from .track_models import BlockRegression
from .tracks import STEP, Track

MIN_SPEED_KMH = 1.0
POLAR_LIMIT = 89.0
THREADS_ENV = "CYCLONE_BANDS_THREADS"


@dataclass(frozen=True)
class SimulationConfig:
    mode: str = "ar"
    lysis: str = "logistic"
    n_sims: int = 350
    max_steps: int = 120
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", check_mode(self.mode))
        check_lysis(self.lysis)
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        if self.max_steps < 4:
            raise ValueError("max_steps must be >= 4")
        object.__setattr__(self, "master_seed", check_seed(self.master_seed))

    @property
    def n_init(self):
        return 3 if self.mode == "ar" else 2


@dataclass
class SimulationEnsemble:
    seed_track_id: str
    config: SimulationConfig
    tracks: list[Track]
    per_track_seeds: list[int]
    annotations: dict[int, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.tracks)


def resolve_threads(threads=None):
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def member_seed(master_seed, index):
    """Stable 64-bit seed for ensemble member `index`."""
    ss = np.random.SeedSequence([check_seed(master_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def initial_points(track, mode):
    """First two (non-AR) or three (AR) observations of a track."""
    n = 3 if check_mode(mode) == "ar" else 2
    if len(track) < n:
        raise ValueError(f"{mode} simulation needs {n} initial points, track has {len(track)}")
    return list(track.points[:n])


def _check_lysis_model(cfg, lysis_model):
    expected = LogisticLysis if cfg.lysis == "logistic" else KernelLifespan
    if not isinstance(lysis_model, expected):
        raise TypeError(f"lysis={cfg.lysis!r} needs a {expected.__name__}")


def _member_draws(rng, cfg, lysis_model):
    """(lifespan or None, uniforms of shape (max_steps, 3)) for one member."""
    life = None
    if cfg.lysis == "kernel":
        life = lysis_model.sample(rng, max_steps=cfg.max_steps)
    return life, rng.random((cfg.max_steps, 3))


def _propagate(init, models, lysis_model, cfg, uniforms, lifespans):
    """Advance a batch of members from shared initial points.

    Returns per-member ``(lat, lon, hit_boundary)``.
    """
    n = len(uniforms)
    k = len(init)
    init_lat = np.array([p.lat for p in init])
    init_lon = np.array([p.lon for p in init])
    lat = np.full((n, cfg.max_steps), np.nan)
    lon = np.full((n, cfg.max_steps), np.nan)
    lat[:, :k] = init_lat
    lon[:, :k] = init_lon
    length = np.full(n, k)
    boundary = np.zeros(n, dtype=bool)

    b0, s0 = track_kinematics(init_lat, init_lon)
    bearing = np.full(n, b0[-1])
    speed = np.full(n, s0[-1])
    lag_db = lag_ds = None
    if cfg.mode == "ar":
        lag_db = np.full(n, bearing_changes(b0)[-1])
        lag_ds = np.full(n, s0[-1] - s0[-2])

    alive = np.ones(n, dtype=bool)
    if lifespans is not None:
        alive &= length < lifespans
    for s in range(k, cfg.max_steps):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        cl, co = lat[idx, s - 1], lon[idx, s - 1]
        cb, cs = bearing[idx], speed[idx]
        mb, ms = models.predict_mean(
            cl, co, cb, cs,
            None if lag_db is None else lag_db[idx],
            None if lag_ds is None else lag_ds[idx],
        )
        u = uniforms[idx, s - k]
        rb, rs = models.draw_residuals(models.slots(cl, co), u[:, 0], u[:, 1])
        db = wrap_delta_bearing(0.0, mb + rb)
        nb = np.mod(cb + db, 360.0)
        ns = np.maximum(cs + ms + rs, MIN_SPEED_KMH)
        nl, no = destination(cl, co, nb, STEP_HOURS * ns)
        nl, no = np.atleast_1d(nl), np.atleast_1d(no)

        out = np.abs(nl) > POLAR_LIMIT
        boundary[idx[out]] = True
        alive[idx[out]] = False
        ok = ~out
        j = idx[ok]
        lat[j, s] = nl[ok]
        lon[j, s] = no[ok]
        length[j] += 1
        if lag_db is not None:
            lag_db[j] = db[ok]
            lag_ds[j] = ns[ok] - cs[ok]
        bearing[j] = nb[ok]
        speed[j] = ns[ok]

        if cfg.lysis == "logistic":
            p = lysis_model.predict_proba(np.column_stack([nl[ok], no[ok], nb[ok], ns[ok]]))
            alive[j[u[ok, 2] < p]] = False
        else:
            alive[j] &= length[j] < lifespans[j]
    return [(lat[i, : length[i]], lon[i, : length[i]], bool(boundary[i])) for i in range(n)]


def _as_track(init, lat, lon, storm_id):
    start = init[0].timestamp
    return Track.from_arrays(storm_id, lat, lon, start)


def simulate_track(init, models, lysis_model, cfg, rng, storm_id="SIM"):
    """Propagate a single track from `init` using random stream `rng`."""
    init = list(init)
    if len(init) != cfg.n_init:
        raise ValueError(f"{cfg.mode} mode needs {cfg.n_init} initial points, got {len(init)}")
    _check_lysis_model(cfg, lysis_model)
    life, u = _member_draws(rng, cfg, lysis_model)
    lifespans = None if life is None else np.array([life])
    (lat, lon, _), = _propagate(init, models, lysis_model, cfg, u[None], lifespans)
    return _as_track(init, lat, lon, storm_id)


def simulate_members(seed_track, models, lysis_model, cfg, members):
    """Simulate the given member indices of an ensemble in one batch."""
    init = initial_points(seed_track, cfg.mode)
    seeds = [member_seed(cfg.master_seed, i) for i in members]
    draws = [_member_draws(np.random.default_rng(sd), cfg, lysis_model) for sd in seeds]
    uniforms = np.stack([d[1] for d in draws])
    lifespans = None if cfg.lysis == "logistic" else np.array([d[0] for d in draws])
    out = _propagate(init, models, lysis_model, cfg, uniforms, lifespans)
    tracks = [
        _as_track(init, la, lo, f"{seed_track.storm_id}-sim{i:04d}")
        for i, (la, lo, _) in zip(members, out)
    ]
    flags = {i: "boundary lysis" for i, (_, _, hit) in zip(members, out) if hit}
    return tracks, seeds, flags


def simulate_ensemble(seed_track, models, lysis_model, cfg, threads=None):
    """Simulate ``cfg.n_sims`` tracks from the seed storm's initial points."""
    _check_lysis_model(cfg, lysis_model)
    threads = min(resolve_threads(threads), cfg.n_sims)
    chunks = [list(c) for c in np.array_split(np.arange(cfg.n_sims), threads) if len(c)]
    if threads == 1:
        results = [simulate_members(seed_track, models, lysis_model, cfg, chunks[0])]
    else:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(
                lambda c: simulate_members(seed_track, models, lysis_model, cfg, c), chunks
            ))
    tracks, seeds, flags = [], [], {}
    for t, s, f in results:
        tracks.extend(t)
        seeds.extend(s)
        flags.update(f)
    return SimulationEnsemble(seed_track.storm_id, cfg, tracks, seeds, flags)


class TrackSimulator(BaseEstimator):
    """Fits motion and lysis models, then simulates ensembles.

    A thin convenience wrapper bundling :class:`BlockRegression` with the
    requested lysis model under one set of hyper-parameters.
    """

    def __init__(self, mode="ar", lysis="logistic", n_sims=350, max_steps=120,
                 min_block_obs=20, ridge=0.0, lysis_ridge=1e-4, random_state=0):
        self.mode = mode
        self.lysis = lysis
        self.n_sims = n_sims
        self.max_steps = max_steps
        self.min_block_obs = min_block_obs
        self.ridge = ridge
        self.lysis_ridge = lysis_ridge
        self.random_state = random_state

    def fit(self, tracks, y=None):
        tracks = check_tracks(tracks, min_count=2)
        self.config_ = SimulationConfig(
            self.mode, self.lysis, self.n_sims, self.max_steps, self.random_state
        )
        self.motion_ = BlockRegression(self.mode, self.min_block_obs, self.ridge).fit(tracks)
        if self.lysis == "logistic":
            self.lysis_ = LogisticLysis(self.min_block_obs, self.lysis_ridge).fit(tracks)
        else:
            self.lysis_ = KernelLifespan(self.max_steps).fit(tracks)
        return self

    def simulate(self, seed_track, master_seed=None, n_sims=None, threads=None):
        check_is_fitted(self, "config_")
        cfg = self.config_
        if master_seed is not None:
            cfg = replace(cfg, master_seed=master_seed)
        if n_sims is not None:
            cfg = replace(cfg, n_sims=n_sims)
        return simulate_ensemble(seed_track, self.motion_, self.lysis_, cfg, threads)
