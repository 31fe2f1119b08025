"""Command-line pipeline: ingest -> train -> simulate -> band -> evaluate/calibrate.

Each subcommand reads and writes files only, so any stage can be rerun on
its own or replaced by an external tool that speaks the same formats.
Exit codes: 0 success, 1 domain error, 2 I/O or usage error.
"""

from __future__ import annotations

import logging
import math
import sys
from pathlib import Path

import click

from . import io
from .bands import BAND_TYPES, DegenerateBandError, make_band
from .depth import distance_matrix, metric_depth
from .evaluation import (
    calibration_experiment,
    format_grid,
    table1_grid,
    train_models,
)
from .simulator import THREADS_ENV, SimulationConfig, resolve_threads, simulate_ensemble
from .tracks import HurdatParseError, prepare_tracks, read_hurdat2, split_train_test

log = logging.getLogger("cyclone_bands")


class DomainError(click.ClickException):
    exit_code = 1


class ArtifactError(click.ClickException):
    exit_code = 2


def _alpha_option(f):
    f = click.option("--allow-any-alpha", is_flag=True,
                     help="Accept alpha outside the usual [0.01, 0.10] range.")(f)
    return click.option("--alpha", type=float, default=0.10, show_default=True)(f)


def _check_alpha(alpha, allow_any):
    if not 0.0 < alpha < 1.0:
        raise click.UsageError("--alpha must lie in (0, 1)")
    if not allow_any and not 0.01 <= alpha <= 0.10:
        raise click.UsageError("--alpha outside [0.01, 0.10]; pass --allow-any-alpha to override")


def _float_or_inf(value):
    return math.inf if str(value).lower() in ("inf", "infinity") else int(value)


def _load(fn, *args):
    try:
        return fn(*args)
    except io.SchemaVersionError as exc:
        raise ArtifactError(str(exc)) from None
    except (OSError, ValueError, KeyError) as exc:
        raise ArtifactError(f"cannot read artifact: {exc}") from None


@click.group()
@click.option("--threads", type=int, default=None, envvar=THREADS_ENV,
              help="Worker threads (default: all cores); results do not depend on it.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, threads, verbose):
    """Tropical-cyclone track ensembles and prediction bands."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"threads": resolve_threads(threads)}


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--train-count", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--start", type=click.DateTime(), default=None, help="Earliest genesis time kept.")
@click.option("--end", type=click.DateTime(), default=None, help="Latest genesis time kept.")
def ingest(input_path, train_count, seed, out, start, end):
    """Parse HURDAT2, filter to synoptic times and split train/test."""
    try:
        raw = read_hurdat2(input_path)
    except HurdatParseError as exc:
        raise ArtifactError(f"{input_path}: {exc}") from None
    tracks = prepare_tracks(raw, start=start, end=end)
    try:
        split = split_train_test(tracks, train_count, seed)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    meta = {"source": Path(input_path).name, "parsed_storms": len(raw), "usable_storms": len(tracks),
            "train_count": train_count}
    io.write_store(out, split, meta)
    click.echo(f"parsed {len(raw)} storms, {len(tracks)} usable: "
               f"{len(split.train)} train / {len(split.test)} test -> {out}")


@main.command()
@click.option("--store", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--min-block-obs", default="20", show_default=True,
              help="Rows needed for a block model; 'inf' keeps only the global model.")
@click.option("--ridge", type=float, default=0.0, show_default=True)
@click.option("--lysis-ridge", type=float, default=1e-4, show_default=True)
@click.option("--max-steps", type=int, default=120, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def train(store, min_block_obs, ridge, lysis_ridge, max_steps, out):
    """Fit AR and non-AR motion models plus both lysis models."""
    split = _load(io.read_store, store)
    if len(split.train) < 2:
        raise DomainError("training split has fewer than 2 storms")
    mbo = _float_or_inf(min_block_obs)
    try:
        models = train_models(split.train, mbo, ridge, lysis_ridge, max_steps)
    except (ValueError, RuntimeError) as exc:
        raise DomainError(str(exc)) from None
    config = {"min_block_obs": mbo, "ridge": ridge, "lysis_ridge": lysis_ridge,
              "max_steps": max_steps, "train_storms": len(split.train)}
    io.write_models(out, models, config)
    blocks = {m: len(models.motion[m].per_block_) for m in models.motion}
    click.echo(f"trained on {len(split.train)} storms; blocks {blocks} -> {out}")


def _find_storm(split, storm_id):
    for t in split.test + split.train:
        if t.storm_id == storm_id:
            return t
    raise DomainError(f"storm {storm_id!r} not found in the track store")


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--store", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--storm-id", required=True)
@click.option("--mode", type=click.Choice(["ar", "nonar"]), default="ar", show_default=True)
@click.option("--lysis", type=click.Choice(["logistic", "kernel"]), default="logistic", show_default=True)
@click.option("--n-sims", type=int, default=350, show_default=True)
@click.option("--max-steps", type=int, default=None, help="Defaults to the model's value.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Ensemble GeoJSON; a CSV with the same stem is written alongside.")
@click.pass_context
def simulate(ctx, model, store, storm_id, mode, lysis, n_sims, max_steps, seed, out):
    """Simulate an ensemble from a storm's initial observations."""
    models, _ = _load(io.read_models, model)
    split = _load(io.read_store, store)
    storm = _find_storm(split, storm_id)
    try:
        cfg = SimulationConfig(mode, lysis, n_sims, max_steps or models.max_steps, seed)
        ens = simulate_ensemble(storm, models.motion_for(mode), models.lysis_for(lysis),
                                cfg, ctx.obj["threads"])
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    io.write_ensemble(out, ens)
    click.echo(f"{len(ens)} tracks from {storm_id} ({mode}, {lysis}) -> {out}")


@main.command()
@click.option("--ensemble", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(BAND_TYPES), required=True)
@_alpha_option
@click.option("--resolution-km", type=float, default=25.0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Band GeoJSON; parameters go to <stem>.params.json.")
@click.option("--depths-out", type=click.Path(dir_okay=False), default=None,
              help="Optional CSV of member depths.")
@click.pass_context
def band(ctx, ensemble, method, alpha, allow_any_alpha, resolution_km, out, depths_out):
    """Build one prediction band from a stored ensemble."""
    _check_alpha(alpha, allow_any_alpha)
    ens = _load(io.read_ensemble, ensemble)
    ranking = None
    try:
        if method != "kde" or depths_out:
            ranking = metric_depth(distance_matrix(ens.tracks, ctx.obj["threads"]))
        b = make_band(method, alpha).fit(ens.tracks, ranking)
    except (DegenerateBandError, ValueError) as exc:
        raise DomainError(str(exc)) from None
    if depths_out:
        io.write_depths_csv(depths_out, ranking)
    area = b.area(resolution_km)
    sidecar = io.write_band(out, b, resolution_km, {"area_km2": area, "seed_track_id": ens.seed_track_id})
    click.echo(f"{method} band, alpha={alpha}, area {area:.0f} km^2 -> {out} (+ {sidecar.name})")


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--store", required=True, type=click.Path(exists=True, dir_okay=False))
@_alpha_option
@click.option("--n-sims", type=int, default=350, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resolution-km", type=float, default=None,
              help="Also rasterize band areas at this resolution (slow).")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Per storm x config x band CSV; the grid goes to <stem>.grid.txt.")
@click.pass_context
def evaluate(ctx, model, store, alpha, allow_any_alpha, n_sims, seed, resolution_km, out):
    """Score all four bands on every test storm under all four configs."""
    _check_alpha(alpha, allow_any_alpha)
    models, _ = _load(io.read_models, model)
    split = _load(io.read_store, store)
    if not split.test:
        raise DomainError("the track store has an empty test split")
    result = table1_grid(split.test, models, alpha, n_sims, seed, resolution_km,
                         threads=ctx.obj["threads"])
    io.write_reports_csv(out, result.reports)
    text = format_grid(result.grid)
    Path(out).with_suffix(".grid.txt").write_text(text + "\n", encoding="utf-8")
    click.echo(text)
    if result.failures:
        click.echo(f"{len(result.failures)} storm/band combinations excluded", err=True)


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--store", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Seed storms are drawn from its test split.")
@click.option("--mode", type=click.Choice(["ar", "nonar"]), default="ar", show_default=True)
@click.option("--lysis", type=click.Choice(["logistic", "kernel"]), default="logistic", show_default=True)
@_alpha_option
@click.option("--n-sims", type=int, default=350, show_default=True)
@click.option("--replicates", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def calibrate(ctx, model, store, mode, lysis, alpha, allow_any_alpha, n_sims, replicates, seed, out):
    """Self-coverage experiment: truth drawn from the same generator."""
    _check_alpha(alpha, allow_any_alpha)
    models, _ = _load(io.read_models, model)
    split = _load(io.read_store, store)
    seeds = split.test or split.train
    need = 3 if mode == "ar" else 2
    seeds = [t for t in seeds if len(t) >= need]
    if not seeds:
        raise DomainError("no seed storms available")
    results = calibration_experiment(models, seeds, mode, lysis, alpha, n_sims, replicates,
                                     seed, ctx.obj["threads"])
    io.write_calibration_csv(out, results)
    for r in results:
        click.echo(f"{r.band_type:<11} uniform {r.uniform_coverage_rate:.3f}  "
                   f"pointwise {r.pointwise_coverage_rate:.3f}  ({r.replicates} replicates)")


if __name__ == "__main__":
    sys.exit(main())
