"""Array geometries on an integer grid and their difference co-arrays.

All geometries live on an equidistant nx-by-ny grid with spacing ``d``.
Sparse geometries are defined by which grid cells carry a sensor; masking
the corresponding channels of a full-grid recording yields the sparse
array's data. Channel order is row-major: channel index = iy * nx + ix.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "SensorSet",
    "GeometryKind",
    "CoArray",
    "CoherentSegment",
    "build_geometry",
    "difference_coarray",
    "coherent_segment",
    "mask_channels",
    "load_sensor_set",
    "dump_sensor_set",
]

DEFAULT_SPACING = 8.255e-3  # meters, half the shortest usable wavelength


@dataclass(frozen=True)
class GridSpec:
    """Equidistant sensor grid: spacing ``d`` in meters, extents nx x ny."""

    d: float = DEFAULT_SPACING
    nx: int = 8
    ny: int = 8

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.d}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"grid extents must be >= 1, got {self.nx}x{self.ny}")

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny


@dataclass(frozen=True)
class SensorSet:
    """A set of occupied grid cells, ordered by row-major channel index.

    ``positions`` is a tuple of (ix, iy) integer pairs sorted by
    iy * nx + ix so that the k-th entry is the k-th channel of the
    (masked) data matrix.
    """

    positions: tuple[tuple[int, int], ...]
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        if not self.positions:
            raise ValueError("sensor set must not be empty")
        seen = set()
        for ix, iy in self.positions:
            if not (0 <= ix < self.grid.nx and 0 <= iy < self.grid.ny):
                raise ValueError(f"sensor ({ix}, {iy}) outside {self.grid.nx}x{self.grid.ny} grid")
            if (ix, iy) in seen:
                raise ValueError(f"duplicate sensor position ({ix}, {iy})")
            seen.add((ix, iy))
        ordered = tuple(sorted(self.positions, key=lambda p: p[1] * self.grid.nx + p[0]))
        object.__setattr__(self, "positions", ordered)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def channel_indices(self) -> np.ndarray:
        """Row-major indices of the occupied cells in a full-grid recording."""
        return np.array([iy * self.grid.nx + ix for ix, iy in self.positions])

    @property
    def grid_coords(self) -> np.ndarray:
        """Integer (ix, iy) coordinates, shape (K, 2)."""
        return np.array(self.positions, dtype=int)

    @property
    def coords(self) -> np.ndarray:
        """Physical sensor coordinates in meters, shape (K, 2)."""
        return self.grid_coords * self.grid.d


class GeometryKind(enum.Enum):
    URA = "URA"
    NESTED = "Nested"
    COPRIME = "Coprime"
    BILLBOARD = "Billboard"
    OPEN_BOX = "Open-Box"
    RANDOM = "Random"

    @classmethod
    def from_name(cls, name: str) -> "GeometryKind":
        key = name.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for kind in cls:
            if kind.value.lower().replace("-", "") == key:
                return kind
        raise ValueError(f"unknown geometry kind {name!r}; choose from "
                         + ", ".join(k.value for k in cls))


@dataclass(frozen=True)
class CoArray:
    """Difference co-array: map from integer offset (mx, my) to multiplicity."""

    offsets: dict[tuple[int, int], int]

    def __len__(self) -> int:
        return len(self.offsets)

    def multiplicity(self, mx: int, my: int) -> int:
        return self.offsets.get((mx, my), 0)

    @property
    def is_symmetric(self) -> bool:
        return all(self.offsets.get((-mx, -my)) == n for (mx, my), n in self.offsets.items())


@dataclass(frozen=True)
class CoherentSegment:
    """Half-extents of the largest centered hole-free rectangle of offsets."""

    mx: int
    my: int

    @property
    def shape(self) -> tuple[int, int]:
        """Virtual URA extent (2*mx + 1, 2*my + 1) in (x, y) order."""
        return (2 * self.mx + 1, 2 * self.my + 1)


def _nested_axis(n: int) -> list[int]:
    """1-D nested positions covering differences 0..n-1 without holes.

    Dense block {0..n1-1} plus sparse block {n1*(m+1)-1} reaching n-1;
    n1 is the divisor of n that minimizes the sensor count.
    """
    best = None
    for n1 in range(1, n + 1):
        if n % n1:
            continue
        n2 = n // n1
        count = n1 + n2 - 1
        if best is None or count < best[0] or (count == best[0] and n1 > best[1]):
            best = (count, n1, n2)
    _, n1, n2 = best
    dense = set(range(n1))
    sparse = {n1 * (m + 1) - 1 for m in range(n2)}
    return sorted(dense | sparse)


def _require(cond: bool, kind: GeometryKind, grid: GridSpec, what: str):
    if not cond:
        raise ValueError(f"{grid.nx}x{grid.ny} grid too small for {kind.value} ({what})")


def build_geometry(kind: GeometryKind | str, grid: GridSpec | None = None,
                   seed: int | None = None, random_count: int | None = None) -> SensorSet:
    """Construct a catalog geometry on the given grid.

    Args:
        kind: Geometry kind or its name.
        grid: Grid spec; defaults to the 8x8 design grid.
        seed: RNG seed, used by ``Random`` only.
        random_count: Sensor count for ``Random``; defaults to
            3 * max(nx, ny) - 1 (23 on the 8x8 grid).

    Returns:
        The geometry's SensorSet. Deterministic for all kinds; ``Random``
        is reproducible from the seed.
    """
    if isinstance(kind, str):
        kind = GeometryKind.from_name(kind)
    if grid is None:
        grid = GridSpec()
    nx, ny = grid.nx, grid.ny

    if kind is GeometryKind.URA:
        cells = [(ix, iy) for iy in range(ny) for ix in range(nx)]

    elif kind is GeometryKind.NESTED:
        xs = _nested_axis(nx)
        ys = _nested_axis(ny)
        cells = [(ix, iy) for iy in ys for ix in xs]

    elif kind is GeometryKind.OPEN_BOX:
        _require(nx >= 2 and ny >= 2, kind, grid, "needs a bottom row and two side columns")
        cells = [(ix, 0) for ix in range(nx)]
        cells += [(0, iy) for iy in range(1, ny)]
        cells += [(nx - 1, iy) for iy in range(1, ny)]

    elif kind is GeometryKind.BILLBOARD:
        _require(nx == ny and nx >= 2, kind, grid, "needs a square grid")
        cells = [(ix, 0) for ix in range(nx)]
        cells += [(0, iy) for iy in range(1, ny)]
        cells += [(k, k) for k in range(1, nx)]

    elif kind is GeometryKind.COPRIME:
        # Union of two square lattices with coprime spacings 2 and 3.
        _require(nx == ny and nx >= 4, kind, grid, "needs a square grid of at least 4x4")
        ax2 = list(range(0, nx, 2))
        ax3 = list(range(0, nx, 3))
        cells = sorted({(ix, iy) for iy in ax2 for ix in ax2}
                       | {(ix, iy) for iy in ax3 for ix in ax3})

    elif kind is GeometryKind.RANDOM:
        count = random_count if random_count is not None else 3 * max(nx, ny) - 1
        corners = [(0, 0), (nx - 1, 0), (0, ny - 1), (nx - 1, ny - 1)]
        corners = sorted(set(corners))
        _require(count <= grid.n_cells, kind, grid, f"cannot place {count} sensors")
        if count < len(corners):
            raise ValueError(f"Random geometry needs at least {len(corners)} sensors "
                             "to keep the grid corners")
        rng = np.random.default_rng(seed)
        pool = [(ix, iy) for iy in range(ny) for ix in range(nx) if (ix, iy) not in corners]
        extra = rng.choice(len(pool), size=count - len(corners), replace=False)
        cells = corners + [pool[i] for i in sorted(extra)]

    else:  # pragma: no cover
        raise ValueError(f"unhandled geometry kind {kind}")

    return SensorSet(tuple(cells), grid)


def difference_coarray(s: SensorSet) -> CoArray:
    """Multiset of pairwise sensor-position differences (ordered pairs)."""
    offsets: dict[tuple[int, int], int] = {}
    pos = s.grid_coords
    for xi, yi in pos:
        for xj, yj in pos:
            key = (int(xi - xj), int(yi - yj))
            offsets[key] = offsets.get(key, 0) + 1
    return CoArray(offsets)


def coherent_segment(c: CoArray) -> CoherentSegment:
    """Largest centered rectangle [-mx..mx] x [-my..my] fully inside the co-array.

    Area-maximal; ties broken toward the squarer, then wider rectangle.
    The (0, 0) singleton is always available.
    """
    present = set(c.offsets)
    max_mx = max(abs(mx) for mx, _ in present)
    max_my = max(abs(my) for _, my in present)

    def column_reach(u: int) -> int:
        # Largest b with (u, v) and (-u, v) present for all |v| <= b.
        if (u, 0) not in present or (-u, 0) not in present:
            return -1
        b = 0
        while b < max_my:
            v = b + 1
            if all((sx * u, sy * v) in present for sx in (1, -1) for sy in (1, -1)):
                b = v
            else:
                break
        return b

    best = (1, 0, 0, 0)  # (area, min-extent, mx, my)
    reach = max_my
    for a in range(0, max_mx + 1):
        r = column_reach(a)
        if r < 0:
            break
        reach = min(reach, r)
        cand = ((2 * a + 1) * (2 * reach + 1), min(a, reach), a, reach)
        if cand > best:
            best = cand
    return CoherentSegment(best[2], best[3])


def mask_channels(data: np.ndarray, s: SensorSet) -> np.ndarray:
    """Restrict a full-grid channel x sample matrix to the sensors in ``s``.

    ``data`` must have one row per grid cell in row-major order
    (iy * nx + ix); the result keeps that ordering. Data already masked to
    ``s`` (row count equals the sensor count) passes through unchanged, so
    masking is idempotent.
    """
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"expected a 2-D channels x samples matrix, got shape {data.shape}")
    if data.shape[0] == s.grid.n_cells:
        return data[s.channel_indices]
    if data.shape[0] == len(s):
        return data
    raise ValueError(
        f"channel count {data.shape[0]} matches neither the "
        f"{s.grid.nx}x{s.grid.ny} grid ({s.grid.n_cells} cells) nor the "
        f"sensor count ({len(s)})")


def dump_sensor_set(s: SensorSet) -> str:
    """Geometry text format: a header line with d/nx/ny, then one 'ix iy' per sensor."""
    out = io.StringIO()
    out.write(f"# d={s.grid.d!r} nx={s.grid.nx} ny={s.grid.ny}\n")
    for ix, iy in s.positions:
        out.write(f"{ix} {iy}\n")
    return out.getvalue()


def load_sensor_set(text: str) -> SensorSet:
    """Parse the geometry text format produced by :func:`dump_sensor_set`."""
    grid = None
    cells = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            fields = dict(item.split("=", 1) for item in line[1:].split())
            grid = GridSpec(d=float(fields["d"]), nx=int(fields["nx"]), ny=int(fields["ny"]))
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'ix iy', got {raw!r}")
        cells.append((int(parts[0]), int(parts[1])))
    if grid is None:
        raise ValueError("geometry text is missing the '# d=... nx=... ny=...' header")
    return SensorSet(tuple(cells), grid)
