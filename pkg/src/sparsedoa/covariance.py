"""Sample covariance, co-array observations, and spatial smoothing.

The covariance of a sparse array, vectorized, lives on the difference
co-array: entry (i, j) belongs to the virtual sensor at offset
kappa_i - kappa_j. Deduplicating and sorting those entries over the
coherent rectangular segment yields the co-array observation vector; its
windowed outer products, averaged, restore the rank that the single
(fully coherent) virtual snapshot lacks, after which any URA subspace
estimator applies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CoherentSegment, SensorSet, coherent_segment, difference_coarray

__all__ = [
    "CovarianceMatrix",
    "CoArrayObservation",
    "SmoothedCovariance",
    "sample_covariance",
    "coarray_observation",
    "spatial_smoothing",
    "effective_manifold",
]

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian sample covariance with the snapshot count that produced it."""

    matrix: np.ndarray
    n_snapshots: int

    def __post_init__(self):
        r = self.matrix
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError(f"covariance must be square, got {r.shape}")
        scale = max(np.abs(r).max(), 1.0)
        if np.abs(r - r.conj().T).max() > 1e-9 * scale:
            raise ValueError("covariance is not Hermitian")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class CoArrayObservation:
    """Deduplicated covariance entries ordered row-major over the coherent segment."""

    values: np.ndarray
    segment: CoherentSegment
    spacing: float

    def __post_init__(self):
        wx, wy = self.segment.shape
        if self.values.shape != (wx * wy,):
            raise ValueError(f"expected {wx * wy} entries for segment {self.segment}, "
                             f"got {self.values.shape}")

    def as_grid(self) -> np.ndarray:
        """Values reshaped to (2*my + 1, 2*mx + 1), y-major like the channel order."""
        wx, wy = self.segment.shape
        return self.values.reshape(wy, wx)


@dataclass(frozen=True)
class SmoothedCovariance:
    """Spatially smoothed covariance over a wx-by-wy virtual URA window."""

    matrix: np.ndarray
    window: tuple[int, int]
    n_subarrays: int
    spacing: float

    def __post_init__(self):
        wx, wy = self.window
        if self.matrix.shape != (wx * wy, wx * wy):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match "
                             f"window {self.window}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def sample_covariance(y: np.ndarray) -> CovarianceMatrix:
    """Snapshot-averaged outer product (snapshots are the columns of ``y``)."""
    y = np.atleast_2d(np.asarray(y))
    if y.shape[1] < 1:
        raise ValueError("need at least one snapshot")
    r = y @ y.conj().T / y.shape[1]
    r = 0.5 * (r + r.conj().T)  # scrub float asymmetry
    return CovarianceMatrix(r, y.shape[1])


def _as_matrix(r) -> np.ndarray:
    return r.matrix if isinstance(r, CovarianceMatrix) else np.asarray(r)


def coarray_observation(r: CovarianceMatrix | np.ndarray, s: SensorSet,
                        redundancy: str = "average") -> CoArrayObservation:
    """Map covariance entries onto the coherent segment of the difference co-array.

    Args:
        r: covariance of the array's channels (dimension must equal ``len(s)``).
        s: the physical sensor set.
        redundancy: how to treat multiple covariance entries sharing one
            virtual position: ``"average"`` (lower variance) or ``"first"``
            (keep the first in vectorization order).

    Returns:
        Observation vector ordered row-major over the segment (y-major,
        x-fast), matching the virtual URA channel convention.
    """
    matrix = _as_matrix(r)
    if matrix.shape[0] != len(s):
        raise ValueError(f"covariance dimension {matrix.shape[0]} does not match "
                         f"{len(s)} sensors")
    if redundancy not in ("average", "first"):
        raise ValueError(f"unknown redundancy rule {redundancy!r}")

    segment = coherent_segment(difference_coarray(s))
    coords = s.grid_coords
    k = len(s)

    buckets: dict[tuple[int, int], list[complex]] = {}
    # Column-major scan of the covariance mirrors the vectorization order,
    # which defines what "first occurrence" means.
    for j in range(k):
        for i in range(k):
            off = (int(coords[i, 0] - coords[j, 0]), int(coords[i, 1] - coords[j, 1]))
            buckets.setdefault(off, []).append(matrix[i, j])

    values = np.empty((2 * segment.my + 1) * (2 * segment.mx + 1), dtype=complex)
    idx = 0
    for my in range(-segment.my, segment.my + 1):
        for mx in range(-segment.mx, segment.mx + 1):
            entries = buckets[(mx, my)]
            values[idx] = np.mean(entries) if redundancy == "average" else entries[0]
            idx += 1
    return CoArrayObservation(values, segment, s.grid.d)


def spatial_smoothing(z: CoArrayObservation,
                      window: tuple[int, int] | None = None) -> SmoothedCovariance:
    """Average outer products of all unit-step windows over the segment.

    The default window is (mx + 1, my + 1): the co-array's per-axis
    apertures, giving the largest virtual URA with at least as many
    sub-arrays as window elements.
    """
    if window is None:
        window = (z.segment.mx + 1, z.segment.my + 1)
    wx, wy = window
    nx, ny = z.segment.shape
    if not (1 <= wx <= nx and 1 <= wy <= ny):
        raise ValueError(f"window {window} exceeds the coherent segment {z.segment.shape}")

    grid = z.as_grid()
    dim = wx * wy
    acc = np.zeros((dim, dim), dtype=complex)
    count = 0
    for by in range(ny - wy + 1):
        for bx in range(nx - wx + 1):
            vec = grid[by:by + wy, bx:bx + wx].reshape(dim)
            acc += np.outer(vec, vec.conj())
            count += 1
    acc /= count
    acc = 0.5 * (acc + acc.conj().T)
    return SmoothedCovariance(acc, (wx, wy), count, z.spacing)


def effective_manifold(a: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker conj(A) (x) A: the difference co-array's steering.

    Column m equals vec(a_m a_m^H) in column-major order, so
    vec(R) = effective_manifold(A) @ p + noise for uncorrelated sources.
    """
    a = np.atleast_2d(np.asarray(a))
    k, m = a.shape
    return np.einsum("jm,im->jim", a.conj(), a).reshape(k * k, m)
