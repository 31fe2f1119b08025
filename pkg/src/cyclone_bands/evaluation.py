"""Scoring bands against true tracks and the coverage experiments."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import check_alpha, check_lysis, check_mode
from .bands import BAND_TYPES, DegenerateBandError, make_band
from .depth import distance_matrix, metric_depth
from .lysis import KernelLifespan, LogisticLysis
from .simulator import SimulationConfig, member_seed, simulate_ensemble
from .track_models import BlockRegression

log = logging.getLogger(__name__)

SIM_CONFIGS = (("ar", "logistic"), ("ar", "kernel"), ("nonar", "logistic"), ("nonar", "kernel"))
CONFIG_LABELS = {
    ("ar", "logistic"): "AR & Logistic",
    ("ar", "kernel"): "AR & Kernel",
    ("nonar", "logistic"): "Non-AR & Logistic",
    ("nonar", "kernel"): "Non-AR & Kernel",
}
BAND_LABELS = {"delta-ball": "Delta-Ball", "hull": "Convex Hull", "kde": "KDE", "spherical": "Spherical"}
# column order of the capture-rate grid
TABLE_BANDS = ("delta-ball", "hull", "kde", "spherical")


@dataclass
class CoverageReport:
    storm_id: str
    band_type: str
    sim_mode: str
    lysis_mode: str
    pointwise_capture: float
    uniform_capture: bool
    area_km2: float = float("nan")


@dataclass
class CalibrationResult:
    band_type: str
    alpha: float
    replicates: int
    uniform_coverage_rate: float
    pointwise_coverage_rate: float
    failures: int = 0


@dataclass
class TrainedModels:
    """Motion models for both modes and both lysis models."""

    motion: dict
    lysis: dict
    max_steps: int = 120

    def lysis_for(self, name):
        return self.lysis[check_lysis(name)]

    def motion_for(self, mode):
        return self.motion[check_mode(mode)]


def train_models(tracks, min_block_obs=20, ridge=0.0, lysis_ridge=1e-4, max_steps=120):
    tracks = list(tracks)
    motion = {m: BlockRegression(m, min_block_obs, ridge).fit(tracks) for m in ("ar", "nonar")}
    lysis = {
        "logistic": LogisticLysis(min_block_obs, lysis_ridge).fit(tracks),
        "kernel": KernelLifespan(max_steps).fit(tracks),
    }
    return TrainedModels(motion, lysis, max_steps)


def score_band(band, truth, band_type=None, sim_mode="", lysis_mode="", resolution_km=None):
    """Fraction of truth points inside the band (seed points included)."""
    if len(truth) == 0:
        raise ValueError("truth track is empty")
    inside = band.contains(truth.lat, truth.lon)
    frac = float(np.mean(inside))
    area = band.area(resolution_km) if resolution_km else float("nan")
    return CoverageReport(
        truth.storm_id, band_type or band.kind, sim_mode, lysis_mode,
        frac, bool(frac == 1.0), area,
    )


def build_bands(tracks, alpha, kinds=BAND_TYPES, threads=1):
    """Fit every requested band; failures come back as exceptions."""
    ranking = None
    if any(k != "kde" for k in kinds):
        ranking = metric_depth(distance_matrix(tracks, threads))
    out = {}
    for kind in kinds:
        try:
            out[kind] = make_band(kind, alpha).fit(tracks, ranking)
        except DegenerateBandError as exc:
            out[kind] = exc
    return out


@dataclass
class GridResult:
    reports: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def grid(self):
        return aggregate_reports(self.reports)


def aggregate_reports(reports):
    """``{(mode, lysis): {band: (median pointwise, uniform proportion)}}``."""
    cells = {}
    for r in reports:
        cells.setdefault((r.sim_mode, r.lysis_mode), {}).setdefault(r.band_type, []).append(r)
    grid = {}
    for cfg, by_band in cells.items():
        grid[cfg] = {
            b: (
                float(np.median([r.pointwise_capture for r in rs])),
                float(np.mean([r.uniform_capture for r in rs])),
            )
            for b, rs in by_band.items()
        }
    return grid


def format_grid(grid):
    """Plain-text capture-rate grid, one row per simulation configuration."""
    head = f"{'Simulation Curve Type':<22}" + "".join(f"{BAND_LABELS[b]:>15}" for b in TABLE_BANDS)
    lines = [head, "-" * len(head)]
    for cfg in SIM_CONFIGS:
        if cfg not in grid:
            continue
        cells = []
        for b in TABLE_BANDS:
            v = grid[cfg].get(b)
            cells.append(f"{v[0]:.2f} / {v[1]:.2f}" if v else "n/a")
        lines.append(f"{CONFIG_LABELS[cfg]:<22}" + "".join(f"{c:>15}" for c in cells))
    return "\n".join(lines)


def storm_seed(master_seed, cfg_index, storm_index):
    return member_seed(member_seed(master_seed, cfg_index), storm_index)


def table1_grid(test, models, alpha=0.10, n_sims=350, master_seed=0,
                resolution_km=None, configs=SIM_CONFIGS, threads=1):
    """Simulate from every test storm under each configuration and score all bands.

    Storm-level failures are recorded in ``failures`` and skipped.
    """
    alpha = check_alpha(alpha)
    test = sorted(test, key=lambda t: t.storm_id)
    result = GridResult()
    for ci, (mode, lysis) in enumerate(configs):
        motion, lys = models.motion_for(mode), models.lysis_for(lysis)
        for si, storm in enumerate(test):
            cfg = SimulationConfig(mode, lysis, n_sims, models.max_steps,
                                   storm_seed(master_seed, ci, si))
            try:
                ens = simulate_ensemble(storm, motion, lys, cfg, threads)
                bands = build_bands(ens.tracks, alpha, threads=threads)
            except (ValueError, DegenerateBandError) as exc:
                result.failures.append((storm.storm_id, mode, lysis, "all", str(exc)))
                continue
            for kind, band in bands.items():
                if isinstance(band, Exception):
                    result.failures.append((storm.storm_id, mode, lysis, kind, str(band)))
                    continue
                result.reports.append(score_band(band, storm, kind, mode, lysis, resolution_km))
    if result.failures:
        log.warning("%d storm/band combinations failed and were excluded", len(result.failures))
    return result


def calibration_replicate(seed_tracks, models, sim_mode, lysis_mode, alpha, n_sims,
                          master_seed, rep, threads=1):
    """One self-coverage replicate: ``{band: (uniform, pointwise)}``.

    Simulates ``n_sims + 1`` tracks from a randomly chosen seed storm and
    holds the last one out as the truth.
    """
    rng = np.random.default_rng(member_seed(master_seed, rep))
    seed_track = seed_tracks[int(rng.integers(len(seed_tracks)))]
    cfg = SimulationConfig(sim_mode, lysis_mode, n_sims + 1, models.max_steps,
                           int(rng.integers(2**63)))
    ens = simulate_ensemble(seed_track, models.motion_for(sim_mode),
                            models.lysis_for(lysis_mode), cfg, threads)
    sims, truth = ens.tracks[:n_sims], ens.tracks[n_sims]
    out = {}
    for kind, band in build_bands(sims, alpha, threads=threads).items():
        if isinstance(band, Exception):
            out[kind] = band
            continue
        inside = band.contains(truth.lat, truth.lon)
        out[kind] = (bool(inside.all()), float(inside.mean()))
    return out


def calibration_experiment(models, seed_tracks, sim_mode="ar", lysis_mode="logistic",
                           alpha=0.10, n_sims=350, replicates=200, master_seed=0, threads=1):
    """Coverage of each band type when truth and ensemble share one generator."""
    alpha = check_alpha(alpha)
    seed_tracks = list(seed_tracks)
    if not seed_tracks:
        raise ValueError("calibration needs at least one seed storm")
    hits = {k: [] for k in BAND_TYPES}
    points = {k: [] for k in BAND_TYPES}
    failures = {k: 0 for k in BAND_TYPES}
    for rep in range(replicates):
        try:
            res = calibration_replicate(seed_tracks, models, sim_mode, lysis_mode,
                                        alpha, n_sims, master_seed, rep, threads)
        except (ValueError, DegenerateBandError):
            for k in failures:
                failures[k] += 1
            continue
        for k, v in res.items():
            if isinstance(v, Exception):
                failures[k] += 1
            else:
                hits[k].append(v[0])
                points[k].append(v[1])
    return [
        CalibrationResult(
            k, alpha, len(hits[k]),
            float(np.mean(hits[k])) if hits[k] else float("nan"),
            float(np.mean(points[k])) if points[k] else float("nan"),
            failures[k],
        )
        for k in BAND_TYPES
    ]


def as_rows(items):
    return [asdict(x) for x in items]
