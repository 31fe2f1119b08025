"""On-disk artifacts exchanged between pipeline stages.

Every JSON artifact carries ``schema_version``; readers refuse any other
version. Floats are written with Python's shortest round-trip repr so that
rerunning a stage with the same inputs reproduces files byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime
from pathlib import Path

import numpy as np

from .bands import (
    ConvexHullBand,
    DeltaBallBand,
    KdeBand,
    SphericalBand,
)
from .geodesy import LocalProjection
from .lysis import KernelLifespan, LogisticLysis
from .simulator import SimulationConfig, SimulationEnsemble
from .track_models import BlockIndex, BlockRegression, LinearModel
from .tracks import DataSplit, Track, TrackPoint

SCHEMA_VERSION = "1.0"


class SchemaVersionError(ValueError):
    pass


def _check_version(doc, what):
    found = doc.get("schema_version") if isinstance(doc, dict) else None
    if found is None and isinstance(doc, dict):
        found = doc.get("properties", {}).get("schema_version")
    if found != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{what} has schema_version {found!r}; this build reads {SCHEMA_VERSION!r}"
        )


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path, what):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    _check_version(doc, what)
    return doc


# -- tracks -----------------------------------------------------------------

def track_to_dict(t):
    return {
        "storm_id": t.storm_id,
        "name": t.name,
        "points": [[p.timestamp.isoformat(), p.lat, p.lon] for p in t.points],
    }


def track_from_dict(d):
    pts = tuple(TrackPoint(datetime.fromisoformat(ts), float(a), float(b)) for ts, a, b in d["points"])
    return Track(d["storm_id"], d.get("name", ""), pts)


def write_store(path, split, meta=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "track-store",
        "seed": split.seed,
        "meta": meta or {},
        "train": [track_to_dict(t) for t in split.train],
        "test": [track_to_dict(t) for t in split.test],
    }
    write_json(path, doc)


def read_store(path):
    doc = read_json(path, f"track store {path}")
    return DataSplit(
        [track_from_dict(d) for d in doc["train"]],
        [track_from_dict(d) for d in doc["test"]],
        doc["seed"],
    )


# -- models -----------------------------------------------------------------

def _linear_to_dict(m):
    return {"coef": _floats(m.coefficients), "residuals": _floats(m.residual_pool)}


def _linear_from_dict(d):
    return LinearModel(np.array(d["coef"], float), np.array(d["residuals"], float))


def block_regression_to_dict(model):
    return {
        "mode": model.mode_,
        "blocks": [
            {
                "lat_band": b.lat_band,
                "lon_band": b.lon_band,
                "bearing": _linear_to_dict(pair[0]),
                "speed": _linear_to_dict(pair[1]),
            }
            for b, pair in model.per_block_.items()
        ],
        "global": {
            "bearing": _linear_to_dict(model.global_[0]),
            "speed": _linear_to_dict(model.global_[1]),
        },
    }


def block_regression_from_dict(d, min_block_obs=20, ridge=0.0):
    model = BlockRegression(d["mode"], min_block_obs, ridge)
    model.mode_ = d["mode"]
    model.global_ = (_linear_from_dict(d["global"]["bearing"]), _linear_from_dict(d["global"]["speed"]))
    model.per_block_ = {
        BlockIndex(b["lat_band"], b["lon_band"]): (
            _linear_from_dict(b["bearing"]), _linear_from_dict(b["speed"])
        )
        for b in d["blocks"]
    }
    model.n_rows_ = model.global_[0].n_obs
    model._build_lookup()
    return model


def logistic_to_dict(model):
    return {
        "blocks": [
            {"lat_band": b.lat_band, "lon_band": b.lon_band, "coef": _floats(c)}
            for b, c in model.per_block_.items()
        ],
        "global": _floats(model.global_),
        "ridge": float(model.ridge),
    }


def logistic_from_dict(d, min_block_obs=20):
    model = LogisticLysis(min_block_obs, d["ridge"])
    model.global_ = np.array(d["global"], float)
    model.per_block_ = {
        BlockIndex(b["lat_band"], b["lon_band"]): np.array(b["coef"], float) for b in d["blocks"]
    }
    model.flags_ = []
    model._build_lookup()
    return model


def kernel_to_dict(model):
    return {"lifespans": [int(v) for v in model.lifespans_], "bandwidth": float(model.bandwidth_)}


def kernel_from_dict(d, max_steps=120):
    model = KernelLifespan(max_steps)
    model.lifespans_ = np.array(d["lifespans"], dtype=int)
    model.bandwidth_ = float(d["bandwidth"])
    return model


def _json_number(v):
    return None if v is None or (isinstance(v, float) and math.isinf(v)) else v


def models_to_dict(models, config):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "model",
        "config": {k: _json_number(v) for k, v in config.items()},
        "track_models": {m: block_regression_to_dict(models.motion[m]) for m in ("ar", "nonar")},
        "logistic": logistic_to_dict(models.lysis["logistic"]),
        "kernel": kernel_to_dict(models.lysis["kernel"]),
    }


def write_models(path, models, config):
    write_json(path, models_to_dict(models, config))


def read_models(path):
    from .evaluation import TrainedModels

    doc = read_json(path, f"model file {path}")
    cfg = doc.get("config", {})
    mbo = cfg.get("min_block_obs")
    mbo = math.inf if mbo is None else mbo
    max_steps = int(cfg.get("max_steps", 120))
    motion = {
        m: block_regression_from_dict(d, mbo, cfg.get("ridge", 0.0))
        for m, d in doc["track_models"].items()
    }
    lysis = {
        "logistic": logistic_from_dict(doc["logistic"], mbo),
        "kernel": kernel_from_dict(doc["kernel"], max_steps),
    }
    return TrainedModels(motion, lysis, max_steps), doc


# -- ensembles --------------------------------------------------------------

def ensemble_to_geojson(ens):
    cfg = ens.config
    features = []
    for i, (t, seed) in enumerate(zip(ens.tracks, ens.per_track_seeds)):
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[lo, la] for la, lo in zip(_floats(t.lat), _floats(t.lon))]},
            "properties": {
                "member": i,
                "seed": str(seed),
                "storm_id": t.storm_id,
                "start_time": t.points[0].timestamp.isoformat(),
                "annotation": ens.annotations.get(i),
            },
        })
    return {
        "type": "FeatureCollection",
        "schema_version": SCHEMA_VERSION,
        "seed_track_id": ens.seed_track_id,
        "config": {
            "mode": cfg.mode, "lysis": cfg.lysis, "n_sims": cfg.n_sims,
            "max_steps": cfg.max_steps, "master_seed": str(cfg.master_seed),
        },
        "features": features,
    }


def ensemble_from_geojson(doc):
    _check_version(doc, "ensemble")
    c = doc["config"]
    cfg = SimulationConfig(c["mode"], c["lysis"], c["n_sims"], c["max_steps"], int(c["master_seed"]))
    tracks, seeds, notes = [], [], {}
    for f in sorted(doc["features"], key=lambda f: f["properties"]["member"]):
        p = f["properties"]
        coords = np.array(f["geometry"]["coordinates"], float)
        tracks.append(Track.from_arrays(
            p["storm_id"], coords[:, 1], coords[:, 0], datetime.fromisoformat(p["start_time"])
        ))
        seeds.append(int(p["seed"]))
        if p.get("annotation"):
            notes[p["member"]] = p["annotation"]
    return SimulationEnsemble(doc["seed_track_id"], cfg, tracks, seeds, notes)


def write_ensemble(path, ens):
    path = Path(path)
    write_json(path, ensemble_to_geojson(ens))
    write_ensemble_csv(path.with_suffix(".csv"), ens)


def read_ensemble(path):
    return ensemble_from_geojson(json.loads(Path(path).read_text(encoding="utf-8")))


def write_ensemble_csv(path, ens):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member", "step", "lat", "lon"])
        for i, t in enumerate(ens.tracks):
            for k, (la, lo) in enumerate(zip(_floats(t.lat), _floats(t.lon))):
                w.writerow([i, k, repr(la), repr(lo)])


def write_depths_csv(path, ranking):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member", "depth"])
        for i, d in enumerate(ranking.depths):
            w.writerow([i, repr(float(d))])


# -- bands ------------------------------------------------------------------

def band_params(band):
    """Exact parameters sufficient to rebuild membership."""
    proj = band.projection_
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": band.kind,
        "alpha": band.alpha_,
        "projection": {"lat0": proj.lat0, "lon0": proj.lon0},
    }
    if isinstance(band, KdeBand):
        doc["params"] = {
            "bandwidths": _floats(band.bandwidths_),
            "threshold": band.threshold_,
            "sample_x": _floats(band.sample_xy_[:, 0]),
            "sample_y": _floats(band.sample_xy_[:, 1]),
        }
    elif isinstance(band, SphericalBand):
        doc["params"] = {
            "center_lat": _floats(band.center_lat_),
            "center_lon": _floats(band.center_lon_),
            "radii": _floats(band.radii_),
            "alive_counts": [int(v) for v in band.alive_counts_],
            "carried_steps": list(band.carried_steps_),
        }
    elif isinstance(band, ConvexHullBand):
        doc["params"] = {"vertices_xy": [_floats(v) for v in band.vertices_]}
    elif isinstance(band, DeltaBallBand):
        doc["params"] = {
            "center_lat": _floats(band.center_lat_),
            "center_lon": _floats(band.center_lon_),
            "delta": band.delta_,
        }
    return doc


def band_from_params(doc):
    _check_version(doc, "band parameters")
    proj = LocalProjection(doc["projection"]["lat0"], doc["projection"]["lon0"])
    p, kind, alpha = doc["params"], doc["method"], doc["alpha"]
    if kind == "delta-ball":
        return DeltaBallBand.from_params(p["center_lat"], p["center_lon"], p["delta"], alpha, proj)
    cls = {"kde": KdeBand, "spherical": SphericalBand, "hull": ConvexHullBand}[kind]
    band = cls(alpha=alpha)
    band.alpha_ = alpha
    band.projection_ = proj
    if kind == "kde":
        band.bandwidths_ = np.array(p["bandwidths"])
        band.threshold_ = p["threshold"]
        band.sample_xy_ = np.column_stack([p["sample_x"], p["sample_y"]])
    elif kind == "spherical":
        band.center_lat_ = np.array(p["center_lat"])
        band.center_lon_ = np.array(p["center_lon"])
        band.radii_ = np.array(p["radii"])
        band.alive_counts_ = np.array(p["alive_counts"])
        band.carried_steps_ = p["carried_steps"]
        band._project_center()
    else:
        band.vertices_ = np.array(p["vertices_xy"])
    return band


def _ring_lonlat(proj, coords):
    x, y = np.asarray(coords).T
    lat, lon = proj.inverse(x, y)
    return [[float(a), float(b)] for a, b in zip(np.atleast_1d(lon), np.atleast_1d(lat))]


def band_geometry(band, resolution_km):
    """GeoJSON geometry: Polygon for the hull, rasterized MultiPolygon otherwise."""
    from shapely.geometry import MultiPolygon, Polygon, box
    from shapely.ops import unary_union

    proj = band.projection_
    if isinstance(band, ConvexHullBand):
        ring = _ring_lonlat(proj, np.vstack([band.vertices_, band.vertices_[:1]]))
        return {"type": "Polygon", "coordinates": [ring]}
    xs, ys, mask = band.raster(resolution_km)
    half = resolution_km / 2.0
    runs = []
    for j, row in enumerate(mask):
        # one rectangle per horizontal run of inside cells
        edges = np.flatnonzero(np.diff(np.concatenate([[0], row.astype(int), [0]])))
        for a, b in zip(edges[::2], edges[1::2]):
            runs.append(box(xs[a] - half, ys[j] - half, xs[b - 1] + half, ys[j] + half))
    merged = unary_union(runs) if runs else MultiPolygon()
    polys = [merged] if isinstance(merged, Polygon) else list(getattr(merged, "geoms", []))
    coords = []
    for poly in polys:
        rings = [_ring_lonlat(proj, poly.exterior.coords)]
        rings += [_ring_lonlat(proj, r.coords) for r in poly.interiors]
        coords.append(rings)
    return {"type": "MultiPolygon", "coordinates": coords}


def write_band(path, band, resolution_km, extra=None):
    """Band GeoJSON plus a ``.params.json`` sidecar with exact parameters."""
    path = Path(path)
    props = {"method": band.kind, "alpha": band.alpha_, "resolution_km": resolution_km}
    props.update(extra or {})
    doc = {
        "type": "FeatureCollection",
        "schema_version": SCHEMA_VERSION,
        "features": [{"type": "Feature", "geometry": band_geometry(band, resolution_km), "properties": props}],
    }
    write_json(path, doc)
    sidecar = path.with_suffix(".params.json")
    write_json(sidecar, band_params(band))
    return sidecar


# -- reports ----------------------------------------------------------------

REPORT_FIELDS = ["storm_id", "sim_mode", "lysis_mode", "band_type",
                 "pointwise_capture", "uniform_capture", "area_km2"]


def write_reports_csv(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for r in reports:
            w.writerow([r.storm_id, r.sim_mode, r.lysis_mode, r.band_type,
                        repr(r.pointwise_capture), int(r.uniform_capture), repr(r.area_km2)])


def read_reports_csv(path):
    from .evaluation import CoverageReport

    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(CoverageReport(
                row["storm_id"], row["band_type"], row["sim_mode"], row["lysis_mode"],
                float(row["pointwise_capture"]), bool(int(row["uniform_capture"])),
                float(row["area_km2"]),
            ))
    return out


def write_calibration_csv(path, results):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["band_type", "alpha", "replicates", "uniform_coverage_rate",
                    "pointwise_coverage_rate", "failures"])
        for r in results:
            w.writerow([r.band_type, r.alpha, r.replicates, repr(r.uniform_coverage_rate),
                        repr(r.pointwise_coverage_rate), r.failures])
