import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedoa.geometry import (GeometryKind, GridSpec, SensorSet, build_geometry,
                                coherent_segment, difference_coarray, dump_sensor_set,
                                load_sensor_set, mask_channels)

# Sensor counts pinned by the mainlobe-magnitude column: 20*log10(k/64).
EXPECTED_COUNTS = {"URA": 64, "Billboard": 22, "Coprime": 21, "Nested": 25,
                   "Open-Box": 22, "Random": 23}


def line_array(xs, nx=None):
    nx = nx or (max(xs) + 1)
    return SensorSet(tuple((x, 0) for x in xs), GridSpec(nx=nx, ny=1))


class TestGridSpec:
    def test_defaults(self):
        grid = GridSpec()
        assert grid.d == pytest.approx(8.255e-3)
        assert (grid.nx, grid.ny) == (8, 8)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            GridSpec(d=0.0)
        with pytest.raises(ValueError):
            GridSpec(nx=0)


class TestSensorSet:
    def test_orders_row_major(self):
        s = SensorSet(((3, 1), (0, 0), (1, 0)), GridSpec(nx=4, ny=2))
        assert s.positions == ((0, 0), (1, 0), (3, 1))
        assert list(s.channel_indices) == [0, 1, 7]

    def test_rejects_duplicates_and_out_of_bounds(self):
        grid = GridSpec(nx=2, ny=2)
        with pytest.raises(ValueError):
            SensorSet(((0, 0), (0, 0)), grid)
        with pytest.raises(ValueError):
            SensorSet(((2, 0),), grid)
        with pytest.raises(ValueError):
            SensorSet((), grid)

    def test_physical_coords_scale_with_spacing(self):
        s = SensorSet(((1, 2),), GridSpec(d=0.01, nx=4, ny=4))
        assert s.coords[0] == pytest.approx([0.01, 0.02])


class TestBuildGeometry:
    @pytest.mark.parametrize("kind,count", EXPECTED_COUNTS.items())
    def test_sensor_counts(self, kind, count, design_grid):
        assert len(build_geometry(kind, design_grid, seed=3)) == count

    def test_ura_on_degenerate_grid(self):
        s = build_geometry("URA", GridSpec(nx=1, ny=1))
        assert s.positions == ((0, 0),)

    def test_open_box_is_three_sides(self, design_grid):
        s = build_geometry("Open-Box", design_grid)
        cells = set(s.positions)
        assert {(x, 0) for x in range(8)} <= cells
        assert {(0, y) for y in range(8)} <= cells
        assert {(7, y) for y in range(8)} <= cells

    def test_random_reproducible_and_keeps_corners(self, design_grid):
        a = build_geometry("Random", design_grid, seed=99)
        b = build_geometry("Random", design_grid, seed=99)
        c = build_geometry("Random", design_grid, seed=100)
        assert a.positions == b.positions
        assert a.positions != c.positions
        assert {(0, 0), (7, 0), (0, 7), (7, 7)} <= set(a.positions)

    def test_too_small_grids_raise(self):
        with pytest.raises(ValueError):
            build_geometry("Coprime", GridSpec(nx=3, ny=3))
        with pytest.raises(ValueError):
            build_geometry("Open-Box", GridSpec(nx=1, ny=8))

    def test_name_parsing(self):
        assert GeometryKind.from_name("open_box") is GeometryKind.OPEN_BOX
        assert GeometryKind.from_name("OPENBOX") is GeometryKind.OPEN_BOX
        with pytest.raises(ValueError):
            GeometryKind.from_name("hexagon")


class TestDifferenceCoarray:
    def test_paper_nested_line_is_hole_free(self):
        # 1-D nested array with positions 0,1,2,3,7,11 covers -11..11.
        ca = difference_coarray(line_array([0, 1, 2, 3, 7, 11], nx=12))
        assert len(ca) == 23
        assert all((m, 0) in ca.offsets for m in range(-11, 12))

    def test_singleton(self):
        ca = difference_coarray(line_array([0], nx=1))
        assert ca.offsets == {(0, 0): 1}

    def test_two_sensor_multiset(self):
        ca = difference_coarray(line_array([0, 3], nx=4))
        assert ca.offsets == {(-3, 0): 1, (0, 0): 2, (3, 0): 1}

    def test_ura_closed_form_multiplicities(self):
        n = 4
        s = build_geometry("URA", GridSpec(nx=n, ny=n))
        ca = difference_coarray(s)
        for mx in range(-n + 1, n):
            for my in range(-n + 1, n):
                assert ca.multiplicity(mx, my) == (n - abs(mx)) * (n - abs(my))

    @pytest.mark.parametrize("kind", EXPECTED_COUNTS)
    def test_symmetric_with_full_zero_multiplicity(self, kind, design_grid):
        s = build_geometry(kind, design_grid, seed=5)
        ca = difference_coarray(s)
        assert ca.is_symmetric
        assert ca.multiplicity(0, 0) == len(s)


class TestCoherentSegment:
    def test_nested_line(self):
        seg = coherent_segment(difference_coarray(line_array([0, 1, 2, 3, 7, 11], nx=12)))
        assert (seg.mx, seg.my) == (11, 0)

    def test_dense_ura(self, design_grid):
        seg = coherent_segment(difference_coarray(build_geometry("URA", design_grid)))
        assert (seg.mx, seg.my) == (7, 7)

    def test_gap_limits_segment(self):
        seg = coherent_segment(difference_coarray(line_array([0, 2], nx=3)))
        assert (seg.mx, seg.my) == (0, 0)

    @pytest.mark.parametrize("kind", ["Nested", "Open-Box", "Billboard"])
    def test_full_aperture_geometries(self, kind, design_grid):
        seg = coherent_segment(difference_coarray(build_geometry(kind, design_grid)))
        assert (seg.mx, seg.my) == (7, 7)

    def test_coprime_center_piece(self, design_grid):
        seg = coherent_segment(difference_coarray(build_geometry("Coprime", design_grid)))
        assert (seg.mx, seg.my) == (4, 4)


@settings(max_examples=25, deadline=None)
@given(st.sets(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=12))
def test_coarray_symmetry_property(cells):
    s = SensorSet(tuple(cells), GridSpec(nx=5, ny=5))
    ca = difference_coarray(s)
    assert ca.is_symmetric
    assert ca.multiplicity(0, 0) == len(s)
    seg = coherent_segment(ca)
    for mx in range(-seg.mx, seg.mx + 1):
        for my in range(-seg.my, seg.my + 1):
            assert ca.multiplicity(mx, my) >= 1


class TestMaskChannels:
    def test_ura_mask_is_identity(self, design_grid, ura):
        data = np.arange(64 * 3, dtype=float).reshape(64, 3)
        assert np.array_equal(mask_channels(data, ura), data)

    def test_open_box_row_count_and_order(self, design_grid):
        s = build_geometry("Open-Box", design_grid)
        data = np.arange(64.0)[:, None]
        masked = mask_channels(data, s)
        assert masked.shape == (22, 1)
        assert np.array_equal(masked[:, 0], np.array(s.channel_indices, dtype=float))

    def test_channel_mismatch_raises(self, ura):
        with pytest.raises(ValueError):
            mask_channels(np.zeros((4, 10)), ura)

    def test_idempotent(self, design_grid):
        s = build_geometry("Nested", design_grid)
        data = np.random.default_rng(0).normal(size=(64, 5))
        once = mask_channels(data, s)
        assert np.array_equal(mask_channels(once, s), once)


class TestTextFormat:
    def test_round_trip(self, design_grid):
        s = build_geometry("Coprime", design_grid)
        again = load_sensor_set(dump_sensor_set(s))
        assert again.positions == s.positions
        assert again.grid == s.grid

    def test_missing_header_raises(self):
        with pytest.raises(ValueError):
            load_sensor_set("0 0\n1 0\n")

    def test_bad_line_raises(self):
        with pytest.raises(ValueError):
            load_sensor_set("# d=0.008255 nx=8 ny=8\n0 0 7\n")
