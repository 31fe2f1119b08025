"""Synthetic Atlantic-like storm tracks for tests and demos.

Storms form in the tropics heading west-northwest, turn clockwise as they
gain latitude (recurvature) and speed up once heading poleward. Death odds
rise with latitude. None of this is fitted to real data.
"""

from datetime import datetime, timedelta

import numpy as np
from scipy.special import expit

from .geodesy import destination, normalize_lon, STEP_HOURS
from .tracks import Track


def synthetic_storms(n, seed=0, start=datetime(1990, 6, 1), max_len=80):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        lat = [rng.uniform(10.0, 22.0)]
        lon = [rng.uniform(-75.0, -25.0)]
        bearing = rng.normal(285.0, 10.0) % 360.0
        speed = max(rng.normal(20.0, 4.0), 5.0)
        turn = 0.0
        for step in range(max_len - 1):
            # heading measured from north, signed: west-northwest ~ -75
            signed = (bearing + 180.0) % 360.0 - 180.0
            pull = 0.2 * (lat[-1] - 16.0) if signed < 50.0 else -0.05 * (signed - 50.0)
            turn = 0.4 * turn + pull + rng.normal(0.0, 5.0)
            bearing = (bearing + turn) % 360.0
            target = 18.0 + 1.6 * max(lat[-1] - 25.0, 0.0)
            speed = max(speed + 0.15 * (target - speed) + rng.normal(0.0, 2.5), 3.0)
            la, lo = destination(lat[-1], lon[-1], bearing, STEP_HOURS * speed)
            lat.append(la)
            lon.append(normalize_lon(lo))
            if step >= 2 and rng.random() < expit(-3.9 + 0.08 * (lat[-1] - 20.0)):
                break
            if abs(la) > 70.0:
                break
        t0 = start + timedelta(days=3 * k)
        t0 = t0.replace(hour=0)
        out.append(Track.from_arrays(f"SY{k % 100:02d}{1900 + k // 100:04d}", lat, lon, t0, "SYNTH"))
    return out
