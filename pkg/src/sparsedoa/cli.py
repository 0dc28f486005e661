"""Command-line interface.

Subcommands: geometry, coarray, beampattern, estimate, montecarlo,
multisource-demo. Exit codes: 0 success, 2 configuration error, 3 data
error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .config import ConfigError, load_config
from .estimators import AngularGrid, MusicDoa, SrpPhat, UnitaryEsprit2D
from .dsp import FilterSpec, bandpass
from .geometry import (GeometryKind, GridSpec, build_geometry, coherent_segment,
                       difference_coarray, dump_sensor_set, mask_channels)
from .harness import (ingest_recording, preprocess, run_beampattern_suite,
                      run_montecarlo, run_multisource_demo, settle_samples,
                      write_results)
from .io import DataError, write_pseudospectrum
from .validation import EstimationError
from .wavefield import SPEED_OF_SOUND

_KIND_NAMES = [k.value for k in GeometryKind]


def _grid_options(fn):
    fn = click.option("--nx", default=8, show_default=True, help="Grid extent in x.")(fn)
    fn = click.option("--ny", default=8, show_default=True, help="Grid extent in y.")(fn)
    fn = click.option("--spacing", "-d", default=8.255e-3, show_default=True,
                      help="Grid spacing in meters.")(fn)
    return fn


@click.group()
def cli():
    """2-D DoA estimation with sparse planar microphone arrays."""


@cli.command()
@click.option("--kind", type=click.Choice(_KIND_NAMES, case_sensitive=False))
@click.option("--list", "list_kinds", is_flag=True, help="List geometry kinds.")
@click.option("--seed", default=0, show_default=True, help="Seed for Random.")
@_grid_options
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write to file.")
def geometry(kind, list_kinds, seed, nx, ny, spacing, output):
    """List geometry kinds or emit a geometry's sensor coordinates."""
    if list_kinds or kind is None:
        for k in GeometryKind:
            click.echo(k.value)
        return
    sensors = build_geometry(kind, GridSpec(spacing, nx, ny), seed=seed)
    text = dump_sensor_set(sensors)
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


@cli.command()
@click.option("--kind", type=click.Choice(_KIND_NAMES, case_sensitive=False), required=True)
@click.option("--seed", default=0, show_default=True)
@_grid_options
def coarray(kind, seed, nx, ny, spacing):
    """Emit a geometry's difference co-array and its coherent segment."""
    sensors = build_geometry(kind, GridSpec(spacing, nx, ny), seed=seed)
    ca = difference_coarray(sensors)
    seg = coherent_segment(ca)
    click.echo(f"# geometry={kind} sensors={len(sensors)} "
               f"segment_mx={seg.mx} segment_my={seg.my}")
    click.echo("# mx my multiplicity")
    for (mx, my), count in sorted(ca.offsets.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        click.echo(f"{mx} {my} {count}")


@cli.command()
@click.option("--frequency", "-f", default=20_000.0, show_default=True)
@click.option("--speed-of-sound", "-c", default=SPEED_OF_SOUND, show_default=True)
@click.option("--elevation-points", default=50, show_default=True)
@click.option("--azimuth-step", default=1.0, show_default=True)
@click.option("--norm-count", default=64, show_default=True)
@click.option("--seed", default=7, show_default=True, help="Seed for Random.")
@_grid_options
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write CSV.")
def beampattern(frequency, speed_of_sound, elevation_points, azimuth_step,
                norm_count, seed, nx, ny, spacing, output):
    """Delay-and-sum beampattern metrics for the geometry catalog."""
    angular = AngularGrid(np.arange(0.0, 360.0, azimuth_step),
                          np.linspace(0.0, 90.0, elevation_points))
    rows = run_beampattern_suite(GridSpec(spacing, nx, ny), frequency, speed_of_sound,
                                 angular, norm_count, random_seed=seed)
    header = "geometry,sensors,mlm_db,mlw_deg,mslr_db,msls_deg"
    lines = [header]
    for r in rows:
        lines.append(f"{r['geometry']},{r['sensors']},{r['mlm_db']:.4g},"
                     f"{r['mlw_deg']:.4g},"
                     f"{'' if r['mslr_db'] is None else format(r['mslr_db'], '.4g')},"
                     f"{'' if r['msls_deg'] is None else format(r['msls_deg'], '.4g')}")
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


@cli.command()
@click.option("--recording", type=click.Path(dir_okay=False),
              help="Estimate from a captured file.")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="Estimate one synthetic scene described by a config file.")
@click.option("--estimator", "estimator_name",
              type=click.Choice(["music", "esprit", "srp-phat"]), default="music",
              show_default=True)
@click.option("--geometry", "kind", type=click.Choice(_KIND_NAMES, case_sensitive=False),
              default="URA", show_default=True,
              help="Mask applied to a full-grid recording.")
@click.option("--sources", "-m", default=1, show_default=True, help="Model order.")
@click.option("--center", default=20_000.0, show_default=True, help="Bandpass center.")
@click.option("--bandwidth", default=2_000.0, show_default=True)
@click.option("--fs", default=None, type=float, help="Expected sample rate.")
@click.option("--smoothing/--no-smoothing", default=False, show_default=True)
@click.option("--seed", default=0, show_default=True, help="Seed for Random geometry.")
@click.option("--spectrum", type=click.Path(dir_okay=False),
              help="Dump the pseudospectrum table here.")
def estimate(recording, config_path, estimator_name, kind, sources, center,
             bandwidth, fs, smoothing, seed, spectrum):
    """Estimate source directions from a recording or a synthetic scene."""
    if (recording is None) == (config_path is None):
        raise click.UsageError("provide exactly one of --recording and --config")
    if config_path is not None:
        _estimate_scene(config_path, spectrum)
        return
    snap = ingest_recording(recording, fs=fs)
    sensors = build_geometry(kind, snap.sensors.grid, seed=seed)
    data = mask_channels(snap.data, sensors) if len(sensors) != snap.n_channels else snap.data
    filt = FilterSpec(center, bandwidth)
    try:
        filt.validate_for(snap.fs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    smoothing_arg = "auto" if smoothing else None
    if estimator_name == "music":
        est = MusicDoa(array=sensors, n_sources=sources, frequency=center,
                       smoothing=smoothing_arg)
        est.fit(preprocess(data, snap.fs, filt, min(4096, data.shape[1])))
    elif estimator_name == "esprit":
        est = UnitaryEsprit2D(array=sensors, n_sources=sources, frequency=center,
                              smoothing=smoothing_arg)
        est.fit(preprocess(data, snap.fs, filt, min(4096, data.shape[1])))
    else:
        est = SrpPhat(array=sensors, fs=snap.fs, band=filt.edges())
        est.fit(bandpass(data, filt, snap.fs)[:, settle_samples(filt, snap.fs):])

    for d in est.directions_:
        click.echo(f"azimuth={d.azimuth:.3f} elevation={d.elevation:.3f}")
    if spectrum:
        if not hasattr(est, "pseudospectrum_"):
            raise ConfigError(f"{estimator_name} does not produce a pseudospectrum")
        write_pseudospectrum(spectrum, est.pseudospectrum_)


def _estimate_scene(config_path, spectrum):
    """Synthesize and score one trial of the config's first experiment cell."""
    from .harness import _trial

    try:
        cfg = load_config(config_path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    kind = GeometryKind.from_name(cfg.geometries[0])
    sensors = build_geometry(kind, cfg.grid, seed=cfg.seed)
    gts, outcome = _trial(cfg, [(kind, sensors)], cfg.snr_db[0], 0, 0)
    matched, errors = outcome[kind.value]
    for gt, est, err in zip(gts, matched, errors):
        click.echo(f"truth azimuth={gt.azimuth:.3f} elevation={gt.elevation:.3f} | "
                   f"estimate azimuth={est.azimuth:.3f} elevation={est.elevation:.3f} | "
                   f"error={err:.4f} deg")
    if spectrum:
        raise ConfigError("--spectrum is only available for --recording runs")


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), required=True)
@click.option("-o", "--output", type=click.Path(file_okay=False),
              help="Output directory (overrides the config).")
@click.option("--workers", default=1, show_default=True)
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--trials", default=None, type=int, help="Override the trial count.")
def montecarlo(config_path, output, workers, seed, trials):
    """Run the Monte-Carlo experiment matrix described by a config file."""
    try:
        cfg = load_config(config_path)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if seed is not None or trials is not None:
        from dataclasses import replace
        cfg = replace(cfg, **({"seed": seed} if seed is not None else {}),
                      **({"trials": trials} if trials is not None else {}))
    outdir = output or cfg.output_dir

    def progress(done, total):
        if done % 50 == 0 or done == total:
            click.echo(f"\r{done}/{total} trials", err=True, nl=(done == total))

    records = run_montecarlo(cfg, workers=workers, progress=progress)
    write_results(records, outdir, cfg)
    click.echo(f"{'cell':24s} {'mean':>8s} {'p50':>8s} {'p95':>8s}")
    for rec in records:
        click.echo(f"{rec.cell:24s} {rec.mean_error:8.3f} {rec.p50_error:8.3f} "
                   f"{rec.p95_error:8.3f}")
    click.echo(f"results written to {outdir}")


@cli.command("multisource-demo")
@click.option("--seed", default=0, show_default=True)
@click.option("--runs", default=1, show_default=True)
@click.option("--snr", default=25.0, show_default=True, help="In-band SNR in dB.")
@click.option("--spectrum", type=click.Path(dir_okay=False),
              help="Dump the first run's MUSIC pseudospectrum.")
def multisource_demo(seed, runs, snr, spectrum):
    """Locate three concurrently emitting coded tags with the Nested selection."""
    successes = 0
    for run in range(runs):
        result = run_multisource_demo(seed=seed + run, snr_db=snr)
        ok = all(e <= 2.0 for e in result.errors)
        successes += ok
        errs = " ".join(f"{e:.3f}" for e in result.errors)
        click.echo(f"run {run}: errors_deg=[{errs}] {'ok' if ok else 'MISS'}")
        if spectrum and run == 0:
            write_pseudospectrum(spectrum, result.pseudospectrum)
    click.echo(f"{successes}/{runs} runs with all tags within 2 deg")


def main():
    try:
        cli(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except (DataError, OSError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(3)
    except (EstimationError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
