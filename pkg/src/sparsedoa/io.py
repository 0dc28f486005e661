"""File formats: recordings, calibration tables, matrix dumps, spectra.

The native recording format is a fixed little-endian header followed by
interleaved 32-bit float frames; standard float WAV containers are
accepted and produced as well.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .estimators import Pseudospectrum

__all__ = [
    "DataError",
    "RECORDING_MAGIC",
    "write_recording",
    "read_recording",
    "write_wav",
    "read_wav",
    "load_calibration_table",
    "dump_calibration_table",
    "write_complex_matrix",
    "read_complex_matrix",
    "write_pseudospectrum",
]

RECORDING_MAGIC = b"SPDOAREC"
_HEADER = struct.Struct("<8sIId Q")  # magic, version, channels, fs, frames
_FORMAT_VERSION = 1


class DataError(Exception):
    """Malformed or inconsistent data file."""


def write_recording(path, data: np.ndarray, fs: float):
    """Write a channels x samples matrix as magic header + interleaved float32."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise DataError(f"expected a 2-D channels x samples matrix, got {data.shape}")
    k, n = data.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(RECORDING_MAGIC, _FORMAT_VERSION, k, float(fs), n))
        fh.write(np.ascontiguousarray(data.T).astype("<f4").tobytes())


def read_recording(path) -> tuple[np.ndarray, float]:
    """Read the native format back; returns (channels x samples float64, fs)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header ({len(raw)} of {_HEADER.size} bytes)")
    magic, version, k, fs, n = _HEADER.unpack_from(raw)
    if magic != RECORDING_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != _FORMAT_VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * k * n
    if len(raw) != expected:
        raise DataError(f"{path}: truncated at byte {len(raw)}, expected {expected}")
    frames = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, k)
    return frames.T.astype(np.float64), fs


def write_wav(path, data: np.ndarray, fs: float):
    """Write channels x samples as a multichannel 32-bit float WAV."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise DataError(f"expected a 2-D channels x samples matrix, got {data.shape}")
    wavfile.write(path, int(round(fs)), np.ascontiguousarray(data.T))


def read_wav(path) -> tuple[np.ndarray, float]:
    """Read a multichannel WAV; returns (channels x samples float64, fs)."""
    try:
        fs, frames = wavfile.read(path)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.dtype.kind == "i":
        frames = frames / float(np.iinfo(frames.dtype).max)
    return frames.T.astype(np.float64), float(fs)


def dump_calibration_table(c: np.ndarray) -> str:
    """Text table 'channel amplitude phase_rad', one line per channel."""
    c = np.asarray(c).reshape(-1)
    lines = ["# channel amplitude phase_rad"]
    for i, value in enumerate(c):
        lines.append(f"{i} {np.abs(value):.12g} {-np.angle(value):.12g}")
    return "\n".join(lines) + "\n"


def load_calibration_table(text: str) -> np.ndarray:
    """Parse a calibration table into a (K, 1) complex column."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"calibration line {lineno}: expected 'channel amplitude "
                            f"phase_rad', got {raw!r}")
        ch, amp, phase = int(parts[0]), float(parts[1]), float(parts[2])
        if amp <= 0:
            raise DataError(f"calibration line {lineno}: amplitude must be positive")
        entries[ch] = amp * np.exp(-1j * phase)
    if not entries:
        raise DataError("calibration table is empty")
    if sorted(entries) != list(range(len(entries))):
        raise DataError("calibration table channels must be 0..K-1 without gaps")
    return np.array([entries[i] for i in range(len(entries))])[:, None]


def write_complex_matrix(path, matrix: np.ndarray, binary: bool = False):
    """Dump a complex matrix row-major, real/imag interleaved."""
    matrix = np.asarray(matrix, dtype=complex)
    if binary:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", *matrix.shape))
            inter = np.empty(matrix.size * 2)
            inter[0::2] = matrix.real.ravel()
            inter[1::2] = matrix.imag.ravel()
            fh.write(inter.astype("<f8").tobytes())
        return
    with open(path, "w") as fh:
        fh.write(f"# {matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


def read_complex_matrix(path, binary: bool = False) -> np.ndarray:
    if binary:
        raw = Path(path).read_bytes()
        rows, cols = struct.unpack_from("<II", raw)
        flat = np.frombuffer(raw, dtype="<f8", offset=8)
        if flat.size != 2 * rows * cols:
            raise DataError(f"{path}: expected {2 * rows * cols} floats, got {flat.size}")
        return (flat[0::2] + 1j * flat[1::2]).reshape(rows, cols)
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DataError(f"{path}: missing shape header")
    rows, cols = map(int, lines[0][1:].split())
    values = []
    for line in lines[1:]:
        if line.strip():
            values.extend(float(tok) for tok in line.split())
    flat = np.asarray(values)
    if flat.size != 2 * rows * cols:
        raise DataError(f"{path}: expected {2 * rows * cols} floats, got {flat.size}")
    return (flat[0::2] + 1j * flat[1::2]).reshape(rows, cols)


def write_pseudospectrum(path, p: Pseudospectrum):
    """Gridded text table: azimuth_deg, elevation_deg, value (scale in header)."""
    with open(path, "w") as fh:
        fh.write(f"# estimator={p.label or 'unknown'} scale={p.scale}\n")
        fh.write("# azimuth_deg elevation_deg value\n")
        for ie, el in enumerate(p.grid.elevations):
            for ia, az in enumerate(p.grid.azimuths):
                fh.write(f"{az:.6g} {el:.6g} {p.values[ie, ia]:.9g}\n")
