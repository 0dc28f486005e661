"""DoA estimators: 2-D MUSIC, 2-D Unitary ESPRIT, SRP-PHAT, delay-and-sum.

The estimator classes follow the scikit-learn protocol: hyperparameters in
``__init__``, computation in ``fit``, results in trailing-underscore
attributes (``directions_``, ``pseudospectrum_``), parameters accessible
through ``get_params``/``set_params``. ``fit`` takes the channels x
snapshots matrix; ``fit_covariance`` accepts a precomputed (possibly
spatially smoothed) covariance instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .covariance import (CovarianceMatrix, SmoothedCovariance, coarray_observation,
                         sample_covariance, spatial_smoothing)
from .geometry import SensorSet
from .validation import EstimationError, check_hermitian, check_snapshot_matrix
from .wavefield import SPEED_OF_SOUND, Direction, steering_from_coords

__all__ = [
    "AngularGrid",
    "Pseudospectrum",
    "EigenPair",
    "eig_hermitian",
    "MusicDoa",
    "UnitaryEsprit2D",
    "SrpPhat",
    "music",
    "unitary_esprit_2d",
    "srp_phat",
    "das_beampattern",
]


@dataclass(frozen=True)
class AngularGrid:
    """Search grid over azimuth [0, 360) x elevation [0, 90]."""

    azimuths: np.ndarray = field(default_factory=lambda: np.arange(0.0, 360.0, 1.0))
    elevations: np.ndarray = field(default_factory=lambda: np.arange(0.0, 91.0, 1.0))

    def __post_init__(self):
        if len(self.azimuths) < 2 or len(self.elevations) < 2:
            raise ValueError("grid needs at least two nodes per axis")

    @classmethod
    def from_steps(cls, azimuth_step: float = 1.0, elevation_step: float = 1.0) -> "AngularGrid":
        if azimuth_step <= 0 or elevation_step <= 0:
            raise ValueError("grid steps must be positive")
        az = np.arange(0.0, 360.0, azimuth_step)
        el = np.arange(0.0, 90.0 + 1e-9, elevation_step)
        if el[-1] < 90.0:
            el = np.append(el, 90.0)
        return cls(az, el)

    @classmethod
    def from_counts(cls, n_azimuth: int, n_elevation: int) -> "AngularGrid":
        return cls(np.linspace(0.0, 360.0, n_azimuth, endpoint=False),
                   np.linspace(0.0, 90.0, n_elevation))

    @property
    def shape(self) -> tuple[int, int]:
        """(n_elevation, n_azimuth): the pseudospectrum layout."""
        return (len(self.elevations), len(self.azimuths))

    def node(self, el_index: int, az_index: int) -> Direction:
        return Direction(float(self.azimuths[az_index] % 360.0),
                         float(self.elevations[el_index]))


@dataclass(frozen=True)
class Pseudospectrum:
    """Direction-indexed score surface on an AngularGrid."""

    grid: AngularGrid
    values: np.ndarray
    scale: str = "linear"
    label: str = ""

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"grid shape {self.grid.shape}")
        if self.scale not in ("linear", "db"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.scale == "linear" and (np.any(self.values < 0)
                                       or not np.all(np.isfinite(self.values))):
            raise ValueError("linear-scale pseudospectrum must be finite and non-negative")


@dataclass(frozen=True)
class EigenPair:
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def eig_hermitian(r) -> EigenPair:
    """Eigendecomposition of a Hermitian (covariance) matrix."""
    if isinstance(r, (CovarianceMatrix, SmoothedCovariance)):
        r = r.matrix
    r = check_hermitian(r)
    w, v = np.linalg.eigh(r)
    return EigenPair(w, v)


def _steering_grid(coords: np.ndarray, grid: AngularGrid, f: float, c: float) -> np.ndarray:
    """Steering phases for every grid node, shape (K, n_el, n_az)."""
    el = grid.elevations[:, None]
    az = grid.azimuths[None, :]
    return steering_from_coords(coords, az, el, f, c)


def _grid_unit_vectors(grid: AngularGrid) -> np.ndarray:
    """(n_el, n_az, 3) unit vectors of the grid nodes."""
    el = np.deg2rad(grid.elevations)[:, None]
    az = np.deg2rad(grid.azimuths)[None, :]
    return np.stack([np.sin(el) * np.cos(az), np.sin(el) * np.sin(az),
                     np.cos(el) * np.ones_like(az)], axis=-1)


def _local_maxima(values: np.ndarray) -> np.ndarray:
    """Boolean mask of grid nodes >= all 8 neighbors (azimuth wraps)."""
    mask = np.ones_like(values, dtype=bool)
    padded = np.pad(values, ((1, 1), (0, 0)), constant_values=-np.inf)
    for de in (-1, 0, 1):
        for da in (-1, 0, 1):
            if de == 0 and da == 0:
                continue
            shifted = np.roll(padded, da, axis=1)[1 + de:padded.shape[0] - 1 + de, :]
            mask &= values >= shifted
    return mask


def _pick_peaks(values: np.ndarray, grid: AngularGrid, count: int,
                separation_deg: float) -> list[tuple[int, int]]:
    """Indices of the ``count`` largest local maxima, at least ``separation_deg`` apart."""
    units = _grid_unit_vectors(grid)
    candidates = np.argwhere(_local_maxima(values))
    order = np.argsort(values[tuple(candidates.T)])[::-1]
    cos_sep = np.cos(np.deg2rad(separation_deg))
    picked: list[tuple[int, int]] = []
    for idx in order:
        ie, ia = candidates[idx]
        u = units[ie, ia]
        if any(units[pe, pa] @ u > cos_sep for pe, pa in picked):
            continue
        picked.append((int(ie), int(ia)))
        if len(picked) == count:
            return picked
    raise EstimationError(
        f"found only {len(picked)} distinct spectral peaks, needed {count}")


def _refine_peak(cost: np.ndarray, grid: AngularGrid, ie: int, ia: int) -> Direction:
    """Sub-grid minimum of ``cost`` near node (ie, ia) via a 3x3 paraboloid fit.

    Across broadside the surface continues at azimuth + 180 deg; the top
    elevation row falls back to the grid node.
    """
    ne, na = cost.shape
    az_step = (grid.azimuths[1] - grid.azimuths[0]) if na > 1 else 1.0
    el_step = (grid.elevations[1] - grid.elevations[0]) if ne > 1 else 1.0

    def value_at(e: int, a: int) -> float:
        if e < 0:
            if na % 2:
                return np.nan
            e = -e
            a = a + na // 2
        if e >= ne:
            return np.nan
        return cost[e, a % na]

    block = np.array([[value_at(ie + de, ia + da) for da in (-1, 0, 1)]
                      for de in (-1, 0, 1)])
    if np.any(np.isnan(block)):
        return grid.node(ie, ia)

    x = np.array([-1.0, 0.0, 1.0])
    xx, yy = np.meshgrid(x, x)  # xx: azimuth offset, yy: elevation offset
    design = np.column_stack([np.ones(9), xx.ravel(), yy.ravel(),
                              xx.ravel() ** 2, (xx * yy).ravel(), yy.ravel() ** 2])
    coef, *_ = np.linalg.lstsq(design, block.ravel(), rcond=None)
    _, c1, c2, c3, c4, c5 = coef
    hess = np.array([[2 * c3, c4], [c4, 2 * c5]])
    det = np.linalg.det(hess)
    if det <= 0 or hess[0, 0] <= 0:
        return grid.node(ie, ia)
    dx, dy = np.linalg.solve(hess, [-c1, -c2])
    dx = float(np.clip(dx, -1.0, 1.0))
    dy = float(np.clip(dy, -1.0, 1.0))
    az = (grid.azimuths[ia] + dx * az_step) % 360.0
    el = float(np.clip(grid.elevations[ie] + dy * el_step, 0.0, 90.0))
    return Direction(float(az), el)


def _virtual_ura_coords(window: tuple[int, int], spacing: float) -> np.ndarray:
    """Row-major (x-fast) coordinates of the window's virtual URA, in meters."""
    wx, wy = window
    ix, iy = np.meshgrid(np.arange(wx), np.arange(wy))
    return np.column_stack([ix.ravel(), iy.ravel()]) * spacing


class MusicDoa(BaseEstimator):
    """2-D MUSIC on a physical array or on a spatially smoothed virtual URA.

    Parameters
    ----------
    array : SensorSet
        Physical array (ignored when fitting a SmoothedCovariance).
    n_sources : int
        Known model order m.
    frequency, c : float
        Narrowband frequency and speed of sound.
    grid : AngularGrid
        Search grid; defaults to 1 deg x 1 deg.
    smoothing : None, "auto", or (wx, wy)
        When set, ``fit`` builds the co-array observation of the sample
        covariance and runs MUSIC on the smoothed virtual URA ("auto" uses
        the per-axis co-array apertures as the window).
    redundancy : str
        Co-array deduplication rule, "average" or "first".
    refine : bool
        Quadratic sub-grid peak refinement.
    peak_separation : float
        Non-maximum-suppression radius in degrees.

    Attributes
    ----------
    directions_ : list of Direction
    pseudospectrum_ : Pseudospectrum
    eigenvalues_ : ascending eigenvalues of the matrix MUSIC ran on
    """

    def __init__(self, array: SensorSet | None = None, n_sources: int = 1,
                 frequency: float = 20_000.0, c: float = SPEED_OF_SOUND,
                 grid: AngularGrid | None = None,
                 smoothing: str | tuple[int, int] | None = None,
                 redundancy: str = "average", refine: bool = True,
                 peak_separation: float = 5.0):
        self.array = array
        self.n_sources = n_sources
        self.frequency = frequency
        self.c = c
        self.grid = grid
        self.smoothing = smoothing
        self.redundancy = redundancy
        self.refine = refine
        self.peak_separation = peak_separation

    def fit(self, X, y=None):
        """Estimate from a channels x snapshots complex sample matrix."""
        X = check_snapshot_matrix(X, want_complex=True)
        return self.fit_covariance(sample_covariance(X))

    def fit_covariance(self, r):
        """Estimate from a CovarianceMatrix or SmoothedCovariance."""
        if isinstance(r, SmoothedCovariance):
            coords = _virtual_ura_coords(r.window, r.spacing)
            matrix = r.matrix
        elif self.smoothing is not None:
            if self.array is None:
                raise ValueError("smoothing requires the physical array")
            obs = coarray_observation(r, self.array, self.redundancy)
            window = None if self.smoothing == "auto" else tuple(self.smoothing)
            smoothed = spatial_smoothing(obs, window)
            coords = _virtual_ura_coords(smoothed.window, smoothed.spacing)
            matrix = smoothed.matrix
        else:
            if self.array is None:
                raise ValueError("MusicDoa needs an array or a SmoothedCovariance")
            if isinstance(r, CovarianceMatrix):
                matrix = r.matrix
            else:
                matrix = check_hermitian(r)
            if matrix.shape[0] != len(self.array):
                raise ValueError(f"covariance dimension {matrix.shape[0]} does not "
                                 f"match array size {len(self.array)}")
            coords = self.array.coords

        m = self.n_sources
        if not 1 <= m < matrix.shape[0]:
            raise ValueError(f"model order {m} must be in [1, {matrix.shape[0] - 1}]")

        pair = eig_hermitian(matrix)
        noise_space = pair.eigenvectors[:, :matrix.shape[0] - m]

        grid = self.grid if self.grid is not None else AngularGrid.from_steps(1.0, 1.0)
        a = _steering_grid(coords, grid, self.frequency, self.c)
        proj = np.tensordot(noise_space.conj().T, a, axes=1)
        denom = np.maximum(np.sum(np.abs(proj) ** 2, axis=0), 1e-300)

        peaks = _pick_peaks(1.0 / denom, grid, m, self.peak_separation)
        if self.refine:
            directions = [_refine_peak(denom, grid, ie, ia) for ie, ia in peaks]
        else:
            directions = [grid.node(ie, ia) for ie, ia in peaks]

        self.eigenvalues_ = pair.eigenvalues
        self.pseudospectrum_ = Pseudospectrum(grid, 1.0 / denom, "linear", "music")
        self.directions_ = directions
        return self


def _unitary_q(n: int) -> np.ndarray:
    """Sparse left-Pi-real unitary transform of size n."""
    p = n // 2
    eye = np.eye(p)
    rev = np.fliplr(eye)
    if n % 2 == 0:
        q = np.block([[eye, 1j * eye], [rev, -1j * rev]])
    else:
        col = np.zeros((p, 1))
        q = np.block([[eye, col, 1j * eye],
                      [col.T, np.array([[np.sqrt(2.0)]]), col.T],
                      [rev, col, -1j * rev]])
    return q / np.sqrt(2.0)


def _solve_invariance(g1: np.ndarray, g2: np.ndarray, mode: str) -> np.ndarray:
    """Solve g1 @ Y = g2 by least squares or total least squares."""
    if mode == "ls":
        return np.linalg.lstsq(g1, g2, rcond=None)[0]
    if mode != "tls":
        raise ValueError(f"mode must be 'ls' or 'tls', got {mode!r}")
    m = g1.shape[1]
    _, _, vt = np.linalg.svd(np.hstack([g1, g2]))
    v = vt.T
    v12 = v[:m, m:]
    v22 = v[m:, m:]
    return -v12 @ np.linalg.inv(v22)


class UnitaryEsprit2D(BaseEstimator):
    """2-D Unitary ESPRIT on a URA covariance, directly or after smoothing.

    The covariance is mapped to a real matrix through the left-Pi-real
    transform (which folds in forward-backward averaging); the two shift
    invariances (x and y) are solved in the real domain and the spatial
    frequency pairs are recovered jointly from the eigenvalues of the
    complexified solution, so azimuth/elevation come out paired.

    Parameters mirror :class:`MusicDoa`; ``mode`` selects least squares
    ("ls") or total least squares ("tls") for the invariance equations.
    """

    def __init__(self, array: SensorSet | None = None, n_sources: int = 1,
                 frequency: float = 20_000.0, c: float = SPEED_OF_SOUND,
                 mode: str = "tls", smoothing: str | tuple[int, int] | None = None,
                 redundancy: str = "average"):
        self.array = array
        self.n_sources = n_sources
        self.frequency = frequency
        self.c = c
        self.mode = mode
        self.smoothing = smoothing
        self.redundancy = redundancy

    def fit(self, X, y=None):
        X = check_snapshot_matrix(X, want_complex=True)
        return self.fit_covariance(sample_covariance(X))

    def fit_covariance(self, r):
        if isinstance(r, SmoothedCovariance):
            matrix, window, spacing = r.matrix, r.window, r.spacing
        elif self.smoothing is not None:
            if self.array is None:
                raise ValueError("smoothing requires the physical array")
            obs = coarray_observation(r, self.array, self.redundancy)
            win = None if self.smoothing == "auto" else tuple(self.smoothing)
            smoothed = spatial_smoothing(obs, win)
            matrix, window, spacing = smoothed.matrix, smoothed.window, smoothed.spacing
        else:
            if self.array is None:
                raise ValueError("UnitaryEsprit2D needs an array or a SmoothedCovariance")
            grid_spec = self.array.grid
            if len(self.array) != grid_spec.n_cells:
                raise ValueError("direct ESPRIT needs a fully populated URA; "
                                 "use smoothing for sparse arrays")
            matrix = r.matrix if isinstance(r, CovarianceMatrix) else check_hermitian(r)
            window, spacing = (grid_spec.nx, grid_spec.ny), grid_spec.d

        wx, wy = window
        n = wx * wy
        if matrix.shape[0] != n:
            raise ValueError(f"covariance dimension {matrix.shape[0]} does not match "
                             f"window {window}")
        m = self.n_sources
        max_m = min((wx - 1) * wy, (wy - 1) * wx)
        if not 1 <= m <= max_m - 1:
            raise ValueError(f"model order {m} infeasible for a {wx}x{wy} window "
                             f"(needs 1 <= m < {max_m})")

        q = _unitary_q(n)
        backward = np.conj(matrix[::-1, ::-1])
        c_complex = q.conj().T @ (matrix + backward) @ q
        self.real_residue_ = float(np.abs(c_complex.imag).max()
                                   / max(np.abs(c_complex).max(), 1e-300))
        c_real = c_complex.real

        w, v = np.linalg.eigh(c_real)
        signal_space = v[:, n - m:]

        j2x = np.kron(np.eye(wy), np.eye(wx)[1:])
        j2y = np.kron(np.eye(wy)[1:], np.eye(wx))
        qx = _unitary_q((wx - 1) * wy)
        qy = _unitary_q(wx * (wy - 1))
        hx = qx.conj().T @ j2x @ q
        hy = qy.conj().T @ j2y @ q

        yx = _solve_invariance(2 * hx.real @ signal_space, 2 * hx.imag @ signal_space,
                               self.mode)
        yy = _solve_invariance(2 * hy.real @ signal_space, 2 * hy.imag @ signal_space,
                               self.mode)

        eigvals = np.linalg.eigvals(yx + 1j * yy)
        mu_x = 2.0 * np.arctan(eigvals.real)
        mu_y = 2.0 * np.arctan(eigvals.imag)

        kd = 2.0 * np.pi * self.frequency * spacing / self.c
        radial = np.hypot(mu_x, mu_y) / kd
        if np.any(radial > 1.0):
            warnings.warn("spatial frequency outside the visible region; "
                          "clamping sin(elevation) to 1", stacklevel=2)
            radial = np.minimum(radial, 1.0)
        elevations = np.rad2deg(np.arcsin(radial))
        azimuths = np.rad2deg(np.arctan2(mu_y, mu_x)) % 360.0

        self.mu_x_ = mu_x
        self.mu_y_ = mu_y
        self.eigenvalues_ = w
        self.directions_ = [Direction(float(az), float(el))
                            for az, el in zip(azimuths, elevations)]
        return self


class SrpPhat(BaseEstimator):
    """Steered response power with phase-transform weighting.

    Whitens each channel's spectrum to unit magnitude, then evaluates the
    steered response over the grid as the sum over channel pairs of the
    GCC-PHAT cross-correlations at the pairs' far-field delays (computed by
    frequency-domain phase shifts, plus a constant per-bin offset that
    keeps the surface non-negative).
    """

    def __init__(self, array: SensorSet = None, grid: AngularGrid | None = None,
                 fs: float = 48_000.0, c: float = SPEED_OF_SOUND,
                 band: tuple[float, float] | None = None):
        self.array = array
        self.grid = grid
        self.fs = fs
        self.c = c
        self.band = band

    def fit(self, X, y=None):
        """Estimate from a channels x samples real recording."""
        X = check_snapshot_matrix(X, want_complex=False, min_channels=2)
        if self.array is None or len(self.array) != X.shape[0]:
            raise ValueError("array is unset or does not match the channel count")

        spectra = np.fft.rfft(X, axis=1)
        freqs = np.fft.rfftfreq(X.shape[1], 1.0 / self.fs)
        keep = (freqs > 0) & (freqs < self.fs / 2)
        if self.band is not None:
            lo, hi = self.band
            keep &= (freqs >= lo) & (freqs <= hi)
        if not np.any(keep):
            raise ValueError("no FFT bins inside the requested band")
        bins = np.nonzero(keep)[0]

        mags = np.abs(spectra[:, bins])
        floor = 1e-12 * max(mags.max(), 1e-300)
        whitened = spectra[:, bins] / np.maximum(mags, floor)

        grid = self.grid if self.grid is not None else AngularGrid.from_steps(1.0, 1.0)
        units = _grid_unit_vectors(grid)
        delays = (self.array.coords @ units[..., :2].reshape(-1, 2).T) / self.c

        # Bin frequencies are multiples of the FFT resolution, so the phase
        # factors advance by one fixed rotation per bin: one exp() call, then
        # complex multiplies.
        df = freqs[1] - freqs[0]
        step = np.exp(-2j * np.pi * df * delays)
        current = np.exp(-2j * np.pi * freqs[bins[0]] * delays)
        power = np.zeros(delays.shape[1])
        previous = bins[0]
        for col, k in enumerate(bins):
            for _ in range(k - previous):
                current *= step
            previous = k
            power += np.abs(np.einsum("i,ig->g", whitened[:, col], current)) ** 2

        values = power.reshape(grid.shape)
        ie, ia = np.unravel_index(np.argmax(values), values.shape)
        self.pseudospectrum_ = Pseudospectrum(grid, values, "linear", "srp-phat")
        self.directions_ = [grid.node(int(ie), int(ia))]
        return self


def das_beampattern(s: SensorSet, steer: Direction, f: float,
                    c: float = SPEED_OF_SOUND, grid: AngularGrid | None = None,
                    norm_count: int | None = None) -> Pseudospectrum:
    """Delay-and-sum response (dB) of the array steered at one direction.

    Normalizing by ``norm_count`` (the full grid's sensor count) makes the
    mainlobe magnitude of a sparse selection read 20*log10(K / norm_count),
    directly comparable across geometries.
    """
    if grid is None:
        grid = AngularGrid.from_steps(1.0, 1.0)
    if norm_count is None:
        norm_count = len(s)
    if norm_count < len(s):
        raise ValueError(f"norm_count {norm_count} is smaller than the array ({len(s)})")
    a_grid = _steering_grid(s.coords, grid, f, c)
    a_steer = steering_from_coords(s.coords, steer.azimuth, steer.elevation, f, c)
    response = np.abs(np.tensordot(a_steer.conj(), a_grid, axes=1))
    values = 20.0 * np.log10(np.maximum(response, 1e-300) / norm_count)
    return Pseudospectrum(grid, values, "db", "das")


def music(r, array: SensorSet | None = None, n_sources: int = 1,
          grid: AngularGrid | None = None, frequency: float = 20_000.0,
          c: float = SPEED_OF_SOUND, **kwargs):
    """Functional MUSIC: returns (pseudospectrum, directions)."""
    est = MusicDoa(array=array, n_sources=n_sources, grid=grid,
                   frequency=frequency, c=c, **kwargs).fit_covariance(r)
    return est.pseudospectrum_, est.directions_


def unitary_esprit_2d(r, array: SensorSet | None = None, n_sources: int = 1,
                      frequency: float = 20_000.0, c: float = SPEED_OF_SOUND,
                      mode: str = "tls", **kwargs) -> list[Direction]:
    """Functional 2-D Unitary ESPRIT: returns the direction list."""
    est = UnitaryEsprit2D(array=array, n_sources=n_sources, frequency=frequency,
                          c=c, mode=mode, **kwargs).fit_covariance(r)
    return est.directions_


def srp_phat(x: np.ndarray, array: SensorSet, grid: AngularGrid | None = None,
             fs: float = 48_000.0, c: float = SPEED_OF_SOUND,
             band: tuple[float, float] | None = None):
    """Functional SRP-PHAT: returns (pseudospectrum, direction)."""
    est = SrpPhat(array=array, grid=grid, fs=fs, c=c, band=band).fit(x)
    return est.pseudospectrum_, est.directions_[0]
