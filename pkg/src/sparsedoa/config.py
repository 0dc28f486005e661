"""Scenario configuration: YAML schema, validation, canonical serialization.

One config file describes one experiment matrix: the cross product of the
listed geometries and SNR points, a source description, the preprocessing
chain, and the estimator policy. Every module precondition that can be
checked statically is checked at load time so a bad scenario fails before
any trial runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import yaml

from .dsp import FilterSpec
from .geometry import GeometryKind, GridSpec
from .wavefield import Direction

__all__ = ["ConfigError", "SourceConfig", "EstimatorConfig", "ScenarioConfig",
           "load_config", "parse_config", "canonical_yaml", "config_hash"]


class ConfigError(Exception):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class SourceConfig:
    """One emitter: fixed or randomly drawn direction, level, waveform."""

    frequency: float = 20_000.0
    level_spl: float = 60.0
    waveform: str = "tone"
    azimuth: float | None = None
    elevation: float | None = None
    max_elevation: float = 90.0
    code_row: int = 1
    code_order: int = 8
    bandwidth: float = 200.0

    @property
    def is_random(self) -> bool:
        return self.azimuth is None or self.elevation is None

    def fixed_direction(self) -> Direction:
        if self.is_random:
            raise ConfigError("source direction is random; draw it per trial")
        return Direction(self.azimuth, self.elevation)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator policy for a scenario.

    ``name`` is one of music, esprit, srp-phat, or auto. The auto policy
    follows the experimental setup: direct ESPRIT on the URA, MUSIC on the
    Random selection (whose co-array has no usable coherent segment), and
    ESPRIT on the spatially smoothed covariance for the other sparse
    geometries.
    """

    name: str = "auto"
    n_sources: int = 1
    mode: str = "tls"
    smoothing: str | tuple[int, int] | None = "auto"
    azimuth_step: float = 1.0
    elevation_step: float = 1.0
    refine: bool = True

    def resolve(self, kind: GeometryKind) -> tuple[str, str | tuple[int, int] | None]:
        """(estimator name, smoothing) for one geometry under this policy."""
        if self.name != "auto":
            return self.name, self.smoothing
        if kind is GeometryKind.URA:
            return "esprit", None
        if kind is GeometryKind.RANDOM:
            return "music", None
        return "esprit", "auto"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    trials: int = 100
    fs: float = 48_000.0
    snapshots: int | None = 1000
    duration: float | None = None
    chunk: int = 4096
    grid: GridSpec = field(default_factory=GridSpec)
    geometries: tuple[str, ...] = ("URA",)
    snr_db: tuple[float, ...] = (30.0,)
    noise_bandwidth: str | float | None = "filter"
    noise_reference: str = "weakest"
    sources: tuple[SourceConfig, ...] = (SourceConfig(),)
    filter: FilterSpec = field(default_factory=lambda: FilterSpec(20_000.0, 2_000.0))
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    output_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if (self.snapshots is None) == (self.duration is None):
            raise ConfigError("specify exactly one of snapshots and duration")
        if self.snapshots is not None and self.snapshots < 8:
            raise ConfigError("need at least 8 snapshots")
        if self.chunk < 16:
            raise ConfigError("chunk size must be >= 16 samples")
        if not self.geometries:
            raise ConfigError("at least one geometry is required")
        for name in self.geometries:
            GeometryKind.from_name(name)
        if not self.sources:
            raise ConfigError("at least one source is required")
        for src in self.sources:
            if src.waveform not in ("tone", "hadamard"):
                raise ConfigError(f"unknown waveform {src.waveform!r}")
            if src.frequency >= self.fs / 2:
                raise ConfigError(f"source at {src.frequency} Hz is above Nyquist")
            if src.azimuth is not None and not 0 <= src.azimuth < 360:
                raise ConfigError("source azimuth must be in [0, 360)")
            if src.elevation is not None and not 0 <= src.elevation <= 90:
                raise ConfigError("source elevation must be in [0, 90]")
        try:
            self.filter.validate_for(self.fs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.estimator.name not in ("auto", "music", "esprit", "srp-phat"):
            raise ConfigError(f"unknown estimator {self.estimator.name!r}")
        if self.estimator.mode not in ("ls", "tls"):
            raise ConfigError("estimator mode must be 'ls' or 'tls'")
        if isinstance(self.noise_bandwidth, str) and self.noise_bandwidth != "filter":
            raise ConfigError("noise bandwidth must be 'filter', a number, or null")

    def resolved_noise_bandwidth(self) -> float | None:
        if self.noise_bandwidth == "filter":
            return self.filter.bandwidth
        return self.noise_bandwidth


def _pick(mapping: dict, key: str, default):
    value = mapping.get(key, default)
    return default if value is None and default is not None else value


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a YAML scenario description."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")

    sampling = raw.get("sampling", {}) or {}
    grid_map = raw.get("grid", {}) or {}
    filt_map = raw.get("filter", {}) or {}
    est_map = raw.get("estimator", {}) or {}
    noise_map = raw.get("noise", {}) or {}
    output_map = raw.get("output", {}) or {}

    sources_raw = raw.get("sources")
    if sources_raw is None:
        sources_raw = [raw.get("source", {}) or {}]
    sources = []
    for smap in sources_raw:
        direction = smap.get("direction", "random")
        az = el = None
        if isinstance(direction, dict):
            az, el = float(direction["azimuth"]), float(direction["elevation"])
        elif direction != "random":
            raise ConfigError("source direction must be 'random' or {azimuth, elevation}")
        sources.append(SourceConfig(
            frequency=float(_pick(smap, "frequency", 20_000.0)),
            level_spl=float(_pick(smap, "level_spl", 60.0)),
            waveform=_pick(smap, "waveform", "tone"),
            azimuth=az, elevation=el,
            max_elevation=float(_pick(smap, "max_elevation", 90.0)),
            code_row=int(_pick(smap, "code_row", 1)),
            code_order=int(_pick(smap, "code_order", 8)),
            bandwidth=float(_pick(smap, "bandwidth", 200.0)),
        ))

    snr = raw.get("snr_db", 30.0)
    if not isinstance(snr, (list, tuple)):
        snr = [snr]

    geometries = raw.get("geometries", ["URA"])
    if isinstance(geometries, str):
        geometries = [geometries]

    est_grid = est_map.get("grid", {}) or {}

    try:
        config = ScenarioConfig(
            name=str(raw.get("name", "scenario")),
            seed=int(raw.get("seed", 0)),
            trials=int(raw.get("trials", 100)),
            fs=float(_pick(sampling, "fs", 48_000.0)),
            snapshots=(int(sampling["snapshots"]) if "snapshots" in sampling else
                       (None if "duration" in sampling else 1000)),
            duration=(float(sampling["duration"]) if "duration" in sampling else None),
            chunk=int(_pick(sampling, "chunk", 4096)),
            grid=GridSpec(d=float(_pick(grid_map, "d", GridSpec().d)),
                          nx=int(_pick(grid_map, "nx", 8)),
                          ny=int(_pick(grid_map, "ny", 8))),
            geometries=tuple(str(g) for g in geometries),
            snr_db=tuple(float(v) for v in snr),
            noise_bandwidth=noise_map.get("bandwidth", "filter"),
            noise_reference=str(_pick(noise_map, "reference", "weakest")),
            sources=tuple(sources),
            filter=FilterSpec(center=float(_pick(filt_map, "center", 20_000.0)),
                              bandwidth=float(_pick(filt_map, "bandwidth", 2_000.0)),
                              order=int(_pick(filt_map, "order", 10))),
            estimator=EstimatorConfig(
                name=str(_pick(est_map, "name", "auto")),
                n_sources=int(_pick(est_map, "n_sources", len(sources))),
                mode=str(_pick(est_map, "mode", "tls")),
                smoothing=_parse_smoothing(est_map.get("smoothing", "auto")),
                azimuth_step=float(_pick(est_grid, "azimuth_step", 1.0)),
                elevation_step=float(_pick(est_grid, "elevation_step", 1.0)),
                refine=bool(_pick(est_map, "refine", True)),
            ),
            output_dir=str(_pick(output_map, "directory", "results")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    return config


def _parse_smoothing(value):
    if value is None or value == "auto":
        return value
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return (int(value[0]), int(value[1]))
    raise ConfigError("smoothing must be 'auto', null, or [wx, wy]")


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def canonical_yaml(config: ScenarioConfig) -> str:
    """Deterministic, re-parseable YAML rendering of a config.

    ``parse_config(canonical_yaml(cfg))`` reproduces ``cfg`` exactly; the
    rendering also feeds the config hash and the run manifest.
    """
    sampling: dict = {"fs": config.fs, "chunk": config.chunk}
    if config.snapshots is not None:
        sampling["snapshots"] = config.snapshots
    else:
        sampling["duration"] = config.duration
    sources = []
    for src in config.sources:
        direction = ("random" if src.is_random
                     else {"azimuth": src.azimuth, "elevation": src.elevation})
        sources.append({
            "frequency": src.frequency, "level_spl": src.level_spl,
            "waveform": src.waveform, "direction": direction,
            "max_elevation": src.max_elevation, "code_row": src.code_row,
            "code_order": src.code_order, "bandwidth": src.bandwidth,
        })
    smoothing = config.estimator.smoothing
    payload = {
        "name": config.name,
        "seed": config.seed,
        "trials": config.trials,
        "sampling": sampling,
        "grid": {"d": config.grid.d, "nx": config.grid.nx, "ny": config.grid.ny},
        "geometries": list(config.geometries),
        "snr_db": list(config.snr_db),
        "noise": {"bandwidth": config.noise_bandwidth,
                  "reference": config.noise_reference},
        "sources": sources,
        "filter": {"center": config.filter.center,
                   "bandwidth": config.filter.bandwidth,
                   "order": config.filter.order},
        "estimator": {
            "name": config.estimator.name,
            "n_sources": config.estimator.n_sources,
            "mode": config.estimator.mode,
            "smoothing": list(smoothing) if isinstance(smoothing, tuple) else smoothing,
            "grid": {"azimuth_step": config.estimator.azimuth_step,
                     "elevation_step": config.estimator.elevation_step},
            "refine": config.estimator.refine,
        },
        "output": {"directory": config.output_dir},
    }
    return yaml.safe_dump(payload, sort_keys=True)


def config_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(canonical_yaml(config).encode()).hexdigest()[:16]
