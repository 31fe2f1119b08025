"""Builders for hand-specified models used by several test modules."""

import math

import numpy as np

from cyclone_bands.lysis import KernelLifespan, LogisticLysis
from cyclone_bands.track_models import BlockRegression, LinearModel


def fixed_motion(mode="ar", bearing_coef=None, speed_coef=None, pool=(0.0,)):
    """Global-only motion model with given coefficients and residual pool."""
    width = 6 if mode == "ar" else 5
    m = BlockRegression(mode, min_block_obs=math.inf)
    m.mode_ = mode
    bc = np.zeros(width) if bearing_coef is None else np.asarray(bearing_coef, float)
    sc = np.zeros(width) if speed_coef is None else np.asarray(speed_coef, float)
    pool = np.asarray(pool, float)
    m.global_ = (LinearModel(bc, pool.copy()), LinearModel(sc, pool.copy()))
    m.per_block_ = {}
    m.n_rows_ = len(pool)
    m._build_lookup()
    return m


def fixed_logistic(intercept):
    m = LogisticLysis(min_block_obs=math.inf)
    m.global_ = np.array([intercept, 0.0, 0.0, 0.0, 0.0])
    m.per_block_ = {}
    m.flags_ = []
    m._build_lookup()
    return m


def fixed_lifespan(length, max_steps=120):
    m = KernelLifespan(max_steps=max_steps, bandwidth=1e-9)
    m.lifespans_ = np.array([length, length])
    m.bandwidth_ = 1e-9
    return m
