"""Direction conventions, steering vectors, and synthetic scene generation.

Conventions used throughout the package:

* azimuth in degrees, [0, 360); elevation in degrees, [0, 90] with 0 at
  array broadside (the grid normal),
* propagation unit vector u = (sin(el)cos(az), sin(el)sin(az), cos(el)),
* incoming plane waves carry a positive phase: the channel at physical
  position r observes exp(+j*2*pi*(f/c) * <r, u>) relative to the origin.

Synthesis and estimation share the phase sign; changing it in one place
silently mirrors every estimated angle.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hadamard as _sylvester_hadamard

from .geometry import SensorSet

__all__ = [
    "SPEED_OF_SOUND",
    "DEFAULT_SAMPLE_RATE",
    "REFERENCE_PRESSURE",
    "Direction",
    "NarrowbandSource",
    "NoiseSpec",
    "SnapshotMatrix",
    "unit_vector",
    "max_frequency",
    "steering_vector",
    "steering_matrix",
    "steering_from_coords",
    "hadamard_codes",
    "bandlimit_and_mix",
    "synthesize_scene",
    "random_directions",
    "spl_to_pressure",
]

SPEED_OF_SOUND = 343.2  # m/s, free air at room temperature
DEFAULT_SAMPLE_RATE = 48_000.0  # Hz
REFERENCE_PRESSURE = 20e-6  # Pa, 0 dB SPL


@dataclass(frozen=True)
class Direction:
    """Azimuth/elevation pair in degrees; elevation 0 is broadside."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not 0.0 <= self.azimuth < 360.0:
            raise ValueError(f"azimuth must be in [0, 360), got {self.azimuth}")
        if not 0.0 <= self.elevation <= 90.0:
            raise ValueError(f"elevation must be in [0, 90], got {self.elevation}")


@dataclass(frozen=True)
class NarrowbandSource:
    """A far-field emitter: direction, carrier frequency, level, waveform.

    ``waveform`` is either ``"tone"`` or ``"hadamard"``; the latter emits a
    bandlimited orthogonal code (row ``code_row`` of the order-``code_order``
    Walsh-Hadamard matrix, chip rate ``bandwidth``) mixed to ``frequency``.
    """

    direction: Direction
    frequency: float
    level_spl: float = 60.0
    waveform: str = "tone"
    code_row: int = 1
    code_order: int = 8
    bandwidth: float = 200.0

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("source frequency must be positive")
        if not np.isfinite(self.level_spl):
            raise ValueError("source level must be finite")
        if self.waveform not in ("tone", "hadamard"):
            raise ValueError(f"unknown waveform {self.waveform!r}")
        if self.waveform == "hadamard" and self.bandwidth <= 0:
            raise ValueError("code bandwidth must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise, specified by in-band SNR or absolute SPL.

    ``snr_db`` is the ratio of the reference source power to the noise power
    inside ``bandwidth`` (full Nyquist band when omitted); ``reference``
    selects the weakest source, the strongest, or the total power.
    ``spl_db`` instead fixes the broadband noise level in dB SPL.
    """

    snr_db: float | None = None
    spl_db: float | None = None
    bandwidth: float | None = None
    reference: str = "weakest"

    def __post_init__(self):
        if (self.snr_db is None) == (self.spl_db is None):
            raise ValueError("specify exactly one of snr_db and spl_db")
        if self.reference not in ("weakest", "strongest", "total"):
            raise ValueError(f"unknown noise reference {self.reference!r}")


@dataclass(frozen=True)
class SnapshotMatrix:
    """A channels x samples block with its sample rate and channel map."""

    data: np.ndarray
    fs: float
    sensors: SensorSet = field(repr=False, default=None)

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] < 1:
            raise ValueError(f"expected a K x N matrix with N >= 1, got {self.data.shape}")
        if self.fs <= 0:
            raise ValueError("sample rate must be positive")
        if self.sensors is not None and len(self.sensors) != self.data.shape[0]:
            raise ValueError(
                f"{self.data.shape[0]} channels but {len(self.sensors)} sensors in the map")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def unit_vector(direction: Direction) -> np.ndarray:
    """Unit propagation vector for a direction; broadside maps to (0, 0, 1)."""
    az = np.deg2rad(direction.azimuth)
    el = np.deg2rad(direction.elevation)
    return np.array([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az), np.cos(el)])


def max_frequency(d: float, c: float = SPEED_OF_SOUND) -> float:
    """Spatial Nyquist frequency c / (2 d) of a grid with spacing ``d``."""
    if d <= 0 or c <= 0:
        raise ValueError("spacing and speed of sound must be positive")
    return c / (2.0 * d)


def steering_from_coords(coords: np.ndarray, azimuth_deg, elevation_deg,
                         f: float, c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Steering phases for arbitrary planar sensor coordinates.

    Args:
        coords: (K, 2) physical sensor coordinates in meters.
        azimuth_deg, elevation_deg: scalars or broadcastable arrays of angles.
        f: narrowband frequency in Hz.
        c: speed of sound in m/s.

    Returns:
        Complex array of shape (K,) + broadcast(azimuth, elevation).shape.
    """
    az = np.deg2rad(np.asarray(azimuth_deg, dtype=float))
    el = np.deg2rad(np.asarray(elevation_deg, dtype=float))
    ux = np.sin(el) * np.cos(az)
    uy = np.sin(el) * np.sin(az)
    proj = np.multiply.outer(coords[:, 0], ux) + np.multiply.outer(coords[:, 1], uy)
    return np.exp(2j * np.pi * (f / c) * proj)


def steering_vector(s: SensorSet, direction: Direction, f: float,
                    c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Steering vector of the array toward one direction (unit-magnitude entries)."""
    fmax = max_frequency(s.grid.d, c)
    if f > fmax * (1 + 1e-9):
        warnings.warn(f"frequency {f:.0f} Hz exceeds the spatial Nyquist limit "
                      f"{fmax:.0f} Hz; estimates may alias", stacklevel=2)
    return steering_from_coords(s.coords, direction.azimuth, direction.elevation, f, c)


def steering_matrix(s: SensorSet, directions: list[Direction], f: float,
                    c: float = SPEED_OF_SOUND) -> np.ndarray:
    """K x M matrix whose columns are steering vectors, one per direction."""
    if not directions:
        raise ValueError("direction list must not be empty")
    return np.column_stack([steering_vector(s, d, f, c) for d in directions])


def hadamard_codes(order: int) -> np.ndarray:
    """Walsh-Hadamard matrix of the given power-of-two order, rows as codes."""
    if order < 1 or order & (order - 1):
        raise ValueError(f"order must be a power of two, got {order}")
    return _sylvester_hadamard(order).astype(float)


def _raised_cosine_gain(freqs: np.ndarray, chip_rate: float, rolloff: float) -> np.ndarray:
    """Amplitude response of a root-raised-cosine pulse at the given frequencies."""
    f = np.abs(freqs)
    flat_edge = (1 - rolloff) * chip_rate / 2
    stop_edge = (1 + rolloff) * chip_rate / 2
    gain = np.zeros_like(f)
    gain[f <= flat_edge] = 1.0
    taper = (f > flat_edge) & (f < stop_edge)
    gain[taper] = np.sqrt(
        0.5 * (1 + np.cos(np.pi / (rolloff * chip_rate) * (f[taper] - flat_edge))))
    return gain


def _code_baseband_period(code: np.ndarray, chip_rate: float, fs: float,
                          rolloff: float = 0.5) -> np.ndarray:
    """One cyclic period of the pulse-shaped chip sequence at unit RMS."""
    code = np.asarray(code, dtype=float)
    n_period = int(round(len(code) * fs / chip_rate))
    if n_period < 2 * len(code):
        raise ValueError("sample rate too low for the chip rate")
    impulses = np.zeros(n_period)
    chip_starts = np.round(np.arange(len(code)) * fs / chip_rate).astype(int)
    impulses[chip_starts] = code
    spectrum = np.fft.rfft(impulses)
    spectrum *= _raised_cosine_gain(np.fft.rfftfreq(n_period, 1.0 / fs), chip_rate, rolloff)
    period = np.fft.irfft(spectrum, n_period)
    rms = np.sqrt(np.mean(period ** 2))
    if rms == 0:
        raise ValueError("code produced an all-zero waveform")
    return period / rms


def bandlimit_and_mix(code: np.ndarray, bandwidth: float, f_c: float, fs: float,
                      duration: float, rolloff: float = 0.5) -> np.ndarray:
    """Pulse-shape a +/-1 chip sequence at rate ``bandwidth`` and mix it to ``f_c``.

    The code repeats cyclically to fill ``duration``; the emitted spectrum is
    confined to f_c +/- (1 + rolloff) * bandwidth / 2. Unit RMS output.
    """
    if f_c + bandwidth / 2 >= fs / 2:
        raise ValueError(f"carrier {f_c} Hz with bandwidth {bandwidth} Hz "
                         f"exceeds Nyquist {fs / 2} Hz")
    n = int(round(duration * fs))
    period = _code_baseband_period(code, bandwidth, fs, rolloff)
    reps = int(np.ceil(n / len(period)))
    baseband = np.tile(period, reps)[:n]
    t = np.arange(n) / fs
    out = baseband * np.cos(2 * np.pi * f_c * t)
    return out * np.sqrt(2.0)


def spl_to_pressure(level_db: float) -> float:
    """RMS pressure in Pa for a level in dB SPL (re 20 uPa)."""
    return REFERENCE_PRESSURE * 10.0 ** (level_db / 20.0)


def _source_entropy(seed, source: NarrowbandSource) -> np.random.SeedSequence:
    # Keyed by the source parameters, not its list position, so that a
    # multi-source scene is the exact sample-wise sum of its single-source
    # scenes under the same seed.
    tag = repr((source.direction.azimuth, source.direction.elevation, source.frequency,
                source.level_spl, source.waveform, source.code_row, source.code_order,
                source.bandwidth))
    digest = zlib.crc32(tag.encode())
    if seed is None:
        return np.random.SeedSequence()
    return np.random.SeedSequence(entropy=(int(seed), digest))


def _channel_delays(s: SensorSet, direction: Direction, c: float) -> np.ndarray:
    """Per-channel arrival lead times <r_k, u> / c in seconds."""
    u = unit_vector(direction)
    return s.coords @ u[:2] / c


def synthesize_scene(sources: list[NarrowbandSource], s: SensorSet, fs: float,
                     duration: float, noise: NoiseSpec | None = None,
                     seed: int | None = None,
                     c: float = SPEED_OF_SOUND) -> np.ndarray:
    """Render the far-field plane-wave scene observed by the array.

    Each source waveform arrives at channel k with lead time <r_k, u>/c,
    implemented as an exact phase shift for tones and as a cyclic
    frequency-domain fractional delay for coded waveforms, and is scaled so
    its per-channel RMS matches the requested dB SPL. White Gaussian noise
    is added per the NoiseSpec. Reproducible from ``seed``.

    Returns:
        Real (K, N) sample matrix.
    """
    n = int(round(duration * fs))
    if n < 1:
        raise ValueError("duration too short for the sample rate")
    k = len(s)
    out = np.zeros((k, n))
    t = np.arange(n) / fs

    powers = []
    for src in sources:
        if src.waveform == "tone" and src.frequency >= fs / 2:
            raise ValueError(f"tone at {src.frequency} Hz is above Nyquist {fs / 2} Hz")
        rms = spl_to_pressure(src.level_spl)
        powers.append(rms ** 2)
        delays = _channel_delays(s, src.direction, c)
        rng = np.random.default_rng(_source_entropy(seed, src))

        if src.waveform == "tone":
            phase0 = rng.uniform(0, 2 * np.pi)
            amp = np.sqrt(2.0) * rms
            arg = 2 * np.pi * src.frequency * (t[None, :] + delays[:, None]) + phase0
            out += amp * np.cos(arg)
        else:
            codes = hadamard_codes(src.code_order)
            if not 0 <= src.code_row < src.code_order:
                raise ValueError(f"code row {src.code_row} out of range for order {src.code_order}")
            period = _code_baseband_period(codes[src.code_row], src.bandwidth, fs)
            if src.frequency + src.bandwidth / 2 >= fs / 2:
                raise ValueError("coded source exceeds Nyquist")
            spectrum = np.fft.rfft(period)
            freqs = np.fft.rfftfreq(len(period), 1.0 / fs)
            reps = int(np.ceil(n / len(period)))
            for ch in range(k):
                shifted = np.fft.irfft(spectrum * np.exp(2j * np.pi * freqs * delays[ch]),
                                       len(period))
                baseband = np.tile(shifted, reps)[:n]
                carrier = np.cos(2 * np.pi * src.frequency * (t + delays[ch]))
                out[ch] += np.sqrt(2.0) * rms * baseband * carrier

    if noise is not None:
        if noise.snr_db is not None:
            if not powers:
                raise ValueError("SNR-mode noise needs at least one source")
            ref = {"weakest": min, "strongest": max, "total": sum}[noise.reference](powers)
            bw = noise.bandwidth if noise.bandwidth is not None else fs / 2
            if not 0 < bw <= fs / 2:
                raise ValueError(f"noise bandwidth must be in (0, fs/2], got {bw}")
            # White noise sized so the power inside ``bw`` meets the SNR.
            var = ref * 10.0 ** (-noise.snr_db / 10.0) * (fs / 2) / bw
        else:
            var = spl_to_pressure(noise.spl_db) ** 2
        noise_seq = (np.random.SeedSequence() if seed is None
                     else np.random.SeedSequence(entropy=(int(seed), 0x6E6F6973)))
        rng = np.random.default_rng(noise_seq)
        out += np.sqrt(var) * rng.standard_normal((k, n))

    return out


def random_directions(count: int, rng: np.random.Generator,
                      max_elevation: float = 90.0) -> list[Direction]:
    """Directions uniform over the spherical cap el <= max_elevation (area-weighted)."""
    cos_cap = np.cos(np.deg2rad(max_elevation))
    cos_el = rng.uniform(cos_cap, 1.0, size=count)
    az = rng.uniform(0.0, 360.0, size=count)
    return [Direction(float(a % 360.0), float(np.rad2deg(np.arccos(ce))))
            for a, ce in zip(az, cos_el)]
