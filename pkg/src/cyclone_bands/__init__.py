"""Tropical-cyclone track ensembles and prediction bands."""

from .bands import ConvexHullBand, DeltaBallBand, KdeBand, SphericalBand, make_band
from .depth import MetricDepth, curve_distance, deepest_subset, distance_matrix, metric_depth
from .evaluation import calibration_experiment, score_band, table1_grid, train_models
from .lysis import KernelLifespan, LogisticLysis
from .simulator import SimulationConfig, TrackSimulator, simulate_ensemble, simulate_track
from .track_models import BlockRegression, fit_ols
from .tracks import Track, TrackPoint, parse_hurdat2, prepare_tracks, read_hurdat2, split_train_test

__version__ = "0.1.0"

__all__ = [
    "BlockRegression",
    "ConvexHullBand",
    "DeltaBallBand",
    "KdeBand",
    "KernelLifespan",
    "LogisticLysis",
    "MetricDepth",
    "SimulationConfig",
    "SphericalBand",
    "Track",
    "TrackPoint",
    "TrackSimulator",
    "calibration_experiment",
    "curve_distance",
    "deepest_subset",
    "distance_matrix",
    "fit_ols",
    "make_band",
    "metric_depth",
    "parse_hurdat2",
    "prepare_tracks",
    "read_hurdat2",
    "score_band",
    "simulate_ensemble",
    "simulate_track",
    "split_train_test",
    "table1_grid",
    "train_models",
]
