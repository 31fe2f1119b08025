"""Track containers and HURDAT2 ingestion.

HURDAT2 is the comma-delimited best-track format published by NOAA's
hurricane research division. Only the date, time, latitude and longitude
columns are consumed here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from functools import cached_property

import numpy as np

from .geodesy import normalize_lon

SYNOPTIC_HOURS = (0, 6, 12, 18)
STEP = timedelta(hours=6)
MIN_TRACK_LENGTH = 4

_HEADER_RE = re.compile(r"^[A-Z]{2}\d{6}$")
_LAT_RE = re.compile(r"^(\d+(?:\.\d+)?)([NS])$")
_LON_RE = re.compile(r"^(\d+(?:\.\d+)?)([EW])$")


class HurdatParseError(ValueError):
    """Raised for malformed HURDAT2 input."""


@dataclass(frozen=True)
class TrackPoint:
    timestamp: datetime
    lat: float
    lon: float


@dataclass(frozen=True)
class Track:
    """Ordered 6-hourly positions of one storm."""

    storm_id: str
    name: str = ""
    points: tuple[TrackPoint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    @cached_property
    def lat(self) -> np.ndarray:
        return np.array([p.lat for p in self.points], dtype=float)

    @cached_property
    def lon(self) -> np.ndarray:
        return np.array([p.lon for p in self.points], dtype=float)

    @property
    def times(self) -> list[datetime]:
        return [p.timestamp for p in self.points]

    @classmethod
    def from_arrays(cls, storm_id, lat, lon, start, name=""):
        """Build a regularly spaced track starting at `start`."""
        pts = tuple(
            TrackPoint(start + i * STEP, float(a), float(b))
            for i, (a, b) in enumerate(zip(lat, lon))
        )
        return cls(storm_id, name, pts)

    def replace_points(self, points) -> Track:
        return Track(self.storm_id, self.name, tuple(points))


@dataclass(frozen=True)
class DataSplit:
    train: list[Track]
    test: list[Track]
    seed: int


def parse_latlon(token: str) -> float:
    """Parse a HURDAT2 coordinate token such as ``28.0N`` or ``94.8W``."""
    tok = token.strip()
    m = _LAT_RE.match(tok)
    if m:
        value = float(m.group(1))
        if value > 90.0:
            raise HurdatParseError(f"latitude out of range: {token!r}")
        return value if m.group(2) == "N" else -value
    m = _LON_RE.match(tok)
    if m:
        value = float(m.group(1))
        return normalize_lon(value if m.group(2) == "E" else -value)
    raise HurdatParseError(f"unparseable coordinate token: {token!r}")


def _parse_row(fields, storm_id, lineno) -> TrackPoint:
    if len(fields) < 6:
        raise HurdatParseError(
            f"{storm_id}: line {lineno}: expected at least 6 fields, got {len(fields)}"
        )
    date, hhmm = fields[0], fields[1]
    try:
        ts = datetime.strptime(date + hhmm.zfill(4), "%Y%m%d%H%M")
    except ValueError:
        raise HurdatParseError(
            f"{storm_id}: line {lineno}: bad date/time {date!r} {hhmm!r}"
        ) from None
    lat_tok, lon_tok = fields[4], fields[5]
    if not _LAT_RE.match(lat_tok):
        raise HurdatParseError(f"{storm_id}: line {lineno}: bad latitude token {lat_tok!r}")
    if not _LON_RE.match(lon_tok):
        raise HurdatParseError(f"{storm_id}: line {lineno}: bad longitude token {lon_tok!r}")
    return TrackPoint(ts, parse_latlon(lat_tok), parse_latlon(lon_tok))


def parse_hurdat2(text: str) -> list[Track]:
    """Parse HURDAT2 text into one Track per header stanza.

    Off-synoptic rows are kept; see :func:`filter_synoptic`.
    """
    tracks = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        i += 1
        if not raw.strip():
            continue
        fields = [f.strip() for f in raw.split(",")]
        if not _HEADER_RE.match(fields[0]):
            raise HurdatParseError(f"line {i}: expected a storm header, got {raw.strip()!r}")
        storm_id = fields[0]
        header_line = i
        try:
            name, count = fields[1], int(fields[2])
        except (IndexError, ValueError):
            raise HurdatParseError(f"{storm_id}: line {i}: malformed header") from None
        points = []
        for k in range(count):
            if i >= len(lines) or not lines[i].strip():
                raise HurdatParseError(
                    f"{storm_id}: header on line {header_line} declares {count} rows "
                    f"but only {k} follow"
                )
            row = [f.strip() for f in lines[i].split(",")]
            if _HEADER_RE.match(row[0]):
                raise HurdatParseError(
                    f"{storm_id}: header on line {header_line} declares {count} rows "
                    f"but a new header starts on line {i + 1} after {k}"
                )
            points.append(_parse_row(row, storm_id, i + 1))
            i += 1
        tracks.append(Track(storm_id, name, tuple(points)))
    return tracks


def read_hurdat2(path) -> list[Track]:
    with open(path, encoding="utf-8") as fh:
        return parse_hurdat2(fh.read())


def format_hurdat2(tracks) -> str:
    """Serialize tracks to HURDAT2 rows (consumed columns only)."""
    out = []
    for t in tracks:
        out.append(f"{t.storm_id}, {t.name:>19}, {len(t):6d},")
        for p in t.points:
            ns = "N" if p.lat >= 0 else "S"
            ew = "E" if p.lon >= 0 else "W"
            out.append(
                f"{p.timestamp:%Y%m%d}, {p.timestamp:%H%M},  , TS, "
                f"{abs(p.lat):.1f}{ns}, {abs(p.lon):5.1f}{ew},  -99, -999,"
            )
    return "\n".join(out) + ("\n" if out else "")


def filter_synoptic(track: Track) -> Track:
    """Keep only rows observed at 00, 06, 12 or 18 UTC on the hour."""
    kept = [
        p for p in track.points
        if p.timestamp.hour in SYNOPTIC_HOURS and p.timestamp.minute == 0
    ]
    return track.replace_points(kept)


def truncate_at_gap(track: Track) -> Track:
    """Keep the prefix up to the first step that is not exactly 6 hours."""
    pts = track.points
    for k in range(1, len(pts)):
        if pts[k].timestamp - pts[k - 1].timestamp != STEP:
            return track.replace_points(pts[:k])
    return track


def prepare_tracks(tracks, min_length=MIN_TRACK_LENGTH, start=None, end=None):
    """Synoptic filter, gap truncation and length threshold in one pass.

    `start`/`end` optionally restrict storms by their first observation time.
    """
    usable = []
    for t in tracks:
        t = truncate_at_gap(filter_synoptic(t))
        if len(t) < min_length:
            continue
        first = t.points[0].timestamp
        if start is not None and first < start:
            continue
        if end is not None and first > end:
            continue
        usable.append(t)
    return usable


def split_train_test(tracks, train_count: int, seed: int) -> DataSplit:
    """Random train/test split, reproducible from `seed`."""
    tracks = list(tracks)
    if train_count < 0 or train_count > len(tracks):
        raise ValueError(
            f"train_count={train_count} must lie in [0, {len(tracks)}]"
        )
    perm = np.random.default_rng(seed).permutation(len(tracks))
    train = [tracks[k] for k in perm[:train_count]]
    test = [tracks[k] for k in perm[train_count:]]
    return DataSplit(train, test, seed)
