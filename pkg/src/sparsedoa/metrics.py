"""Error and beampattern metrics.

The spherical error (great-circle angle between estimate and truth) is the
single error figure used everywhere: it discounts azimuth uncertainty near
broadside, where azimuth is nearly unobservable. Beampattern quality is
summarized by the mainlobe magnitude/width and the level/separation of the
strongest sidelobe, all measured on a gridded dB pattern.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .estimators import Pseudospectrum, _grid_unit_vectors, _local_maxima
from .wavefield import Direction, unit_vector

__all__ = [
    "BeamMetrics",
    "ErrorSummary",
    "spherical_error",
    "beam_metrics",
    "error_summary",
    "fov_fraction",
]


@dataclass(frozen=True)
class BeamMetrics:
    """Mainlobe magnitude/width and strongest-sidelobe ratio/separation.

    ``mlw_deg`` is the narrowest -3 dB full width over all azimuth cuts
    through the peak (the scalar quoted for asymmetric patterns);
    ``mlw_worst_deg`` is the widest cut, and ``cut_widths`` keeps the whole
    profile for inspection.
    """

    mlm_db: float
    mlw_deg: float
    mslr_db: float | None
    msls_deg: float | None
    mlw_worst_deg: float | None = None
    cut_widths: np.ndarray | None = None


@dataclass(frozen=True)
class ErrorSummary:
    """Pose-wise spherical errors with mean and 50th/95th percentiles."""

    errors: np.ndarray
    mean: float
    p50: float
    p95: float
    n_total: int
    n_kept: int


def spherical_error(est: Direction, gt: Direction) -> float:
    """Great-circle angle between two directions, in degrees."""
    dot = float(np.clip(unit_vector(est) @ unit_vector(gt), -1.0, 1.0))
    return float(np.rad2deg(np.arccos(dot)))


def _mainlobe_mask(values: np.ndarray, peak: tuple[int, int], threshold: float) -> np.ndarray:
    """Connected region of nodes >= threshold containing the peak (azimuth wraps)."""
    ne, na = values.shape
    mask = np.zeros_like(values, dtype=bool)
    queue = deque([peak])
    mask[peak] = True
    while queue:
        ie, ia = queue.popleft()
        for de, da in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            je, ja = ie + de, (ia + da) % na
            if 0 <= je < ne and not mask[je, ja] and values[je, ja] >= threshold:
                mask[je, ja] = True
                queue.append((je, ja))
    return mask


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:, :] |= mask[:-1, :]
    out[:-1, :] |= mask[1:, :]
    out |= np.roll(mask, 1, axis=1)
    out |= np.roll(mask, -1, axis=1)
    return out


def _crossing_distance(angles: np.ndarray, vals: np.ndarray, start: int,
                       threshold: float, step: int) -> float:
    """Angular distance from ``start`` to the interpolated threshold crossing."""
    i = start
    while True:
        j = i + step
        if j < 0 or j >= len(vals):
            return abs(angles[i] - angles[start])  # never crossed: cap at profile end
        if vals[j] < threshold:
            frac = (vals[i] - threshold) / (vals[i] - vals[j])
            return abs(angles[i] - angles[start]) + frac * abs(angles[j] - angles[i])
        i = j


def _great_circle_cut(values: np.ndarray, elevations: np.ndarray, ia: int,
                      na: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Elevation profile through the pole: azimuth ia+180 descending, then ia.

    Returns (signed elevation angles, values, index of elevation 0).
    """
    opposite = (ia + na // 2) % na
    angles = np.concatenate([-elevations[::-1], elevations[1:]])
    vals = np.concatenate([values[::-1, opposite], values[1:, ia]])
    return angles, vals, len(elevations) - 1


def beam_metrics(p: Pseudospectrum, steer: Direction) -> BeamMetrics:
    """Measure a dB beampattern around its peak.

    The mainlobe width is the -3 dB full width through the peak, measured
    along every azimuth cut (for a broadside peak every azimuth is such a
    cut); the narrowest cut is the headline figure. The sidelobe is the
    strongest local maximum outside the mainlobe region (the connected
    above--3 dB zone, dilated by one grid step).
    """
    if p.scale != "db":
        raise ValueError("beam metrics need a dB-scale pseudospectrum")
    values = p.values
    grid = p.grid
    ne, na = values.shape
    ie, ia = np.unravel_index(np.argmax(values), values.shape)
    mlm = float(values[ie, ia])
    threshold = mlm - 3.0

    # Mainlobe width over azimuth cuts through the peak.
    widths = []
    if grid.elevations[ie] == 0.0 and na % 2 == 0:
        cut_azimuths = range(na // 2)
    else:
        cut_azimuths = [int(ia)]
    for a in cut_azimuths:
        angles, vals, _ = _great_circle_cut(values, grid.elevations, a, na)
        start = int(np.argmax(vals))
        up = _crossing_distance(angles, vals, start, threshold, +1)
        down = _crossing_distance(angles, vals, start, threshold, -1)
        widths.append(up + down)
    if grid.elevations[ie] != 0.0:
        # Constant-elevation cut, scaled to spherical degrees.
        row = values[ie]
        az = grid.azimuths
        order = np.argsort(((az - az[ia]) + 180.0) % 360.0 - 180.0)
        rel = np.sort(((az - az[ia]) + 180.0) % 360.0 - 180.0)
        vals = row[order]
        start = int(np.argmin(np.abs(rel)))
        width_az = (_crossing_distance(rel, vals, start, threshold, +1)
                    + _crossing_distance(rel, vals, start, threshold, -1))
        widths.append(width_az * float(np.sin(np.deg2rad(grid.elevations[ie]))))
    cut_widths = np.asarray(widths)
    mlw = float(cut_widths.min())
    mlw_worst = float(cut_widths.max())

    # Strongest sidelobe outside the dilated mainlobe region.
    region = _dilate(_mainlobe_mask(values, (int(ie), int(ia)), threshold))
    outside = _local_maxima(values) & ~region
    if not np.any(outside):
        return BeamMetrics(mlm, mlw, None, None, mlw_worst, cut_widths)
    side_vals = np.where(outside, values, -np.inf)
    je, ja = np.unravel_index(np.argmax(side_vals), side_vals.shape)
    units = _grid_unit_vectors(grid)
    cos_sep = float(np.clip(units[ie, ia] @ units[je, ja], -1.0, 1.0))
    mslr = mlm - float(values[je, ja])
    msls = float(np.rad2deg(np.arccos(cos_sep)))
    return BeamMetrics(mlm, mlw, mslr, msls, mlw_worst, cut_widths)


def error_summary(errors, exclude_above: float | None = None,
                  ground_truths: list[Direction] | None = None) -> ErrorSummary:
    """Summarize pose-wise spherical errors, optionally excluding high elevations.

    ``exclude_above`` drops poses whose ground-truth elevation exceeds the
    given angle before summarizing. Percentiles interpolate linearly
    between order statistics.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1:
        raise ValueError("errors must be a flat sequence")
    n_total = len(errors)
    if exclude_above is not None:
        if ground_truths is None or len(ground_truths) != n_total:
            raise ValueError("elevation filtering needs one ground truth per error")
        keep = np.array([gt.elevation <= exclude_above for gt in ground_truths])
        errors = errors[keep]
    if errors.size == 0:
        raise ValueError("no poses left to summarize")
    if np.any((errors < 0) | (errors > 180)):
        raise ValueError("spherical errors must lie in [0, 180] degrees")
    return ErrorSummary(
        errors=errors,
        mean=float(np.mean(errors)),
        p50=float(np.percentile(errors, 50)),
        p95=float(np.percentile(errors, 95)),
        n_total=n_total,
        n_kept=int(errors.size),
    )


def fov_fraction(theta_max: float) -> float:
    """Solid angle of the cone elevation <= theta_max, normalized by the hemisphere."""
    if not 0.0 < theta_max <= 90.0:
        raise ValueError(f"theta_max must be in (0, 90], got {theta_max}")
    return float(1.0 - np.cos(np.deg2rad(theta_max)))
