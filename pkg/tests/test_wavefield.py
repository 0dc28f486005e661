import numpy as np
import pytest

from sparsedoa.geometry import GridSpec, SensorSet
from sparsedoa.wavefield import (Direction, NarrowbandSource, NoiseSpec, SnapshotMatrix,
                                 bandlimit_and_mix, hadamard_codes, max_frequency,
                                 random_directions, spl_to_pressure, steering_matrix,
                                 steering_vector, synthesize_scene, unit_vector)


class TestDirection:
    def test_ranges(self):
        with pytest.raises(ValueError):
            Direction(360.0, 10.0)
        with pytest.raises(ValueError):
            Direction(0.0, 90.5)

    def test_unit_vector_examples(self):
        assert unit_vector(Direction(123.0, 0.0)) == pytest.approx([0, 0, 1])
        assert unit_vector(Direction(0.0, 90.0)) == pytest.approx([1, 0, 0], abs=1e-12)
        assert unit_vector(Direction(45.0, 30.0)) == pytest.approx(
            [0.35355, 0.35355, 0.86603], abs=1e-5)

    def test_unit_norm_on_dense_grid(self):
        for az in np.arange(0, 360, 7.3):
            for el in np.arange(0, 90.001, 4.7):
                v = unit_vector(Direction(float(az), float(min(el, 90.0))))
                assert abs(np.linalg.norm(v) - 1.0) < 1e-12


class TestMaxFrequency:
    def test_design_point(self):
        # The 8.255 mm pitch tops out just shy of 20.788 kHz at room temperature.
        assert max_frequency(8.255e-3, 343.2) == pytest.approx(20_788.0, abs=1.0)

    def test_half_wavelength(self):
        lam = 0.02
        assert max_frequency(lam / 2, 340.0) == pytest.approx(340.0 / lam)

    def test_closed_form(self):
        assert max_frequency(0.01, 343.2) == pytest.approx(17_160.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            max_frequency(0.0)


class TestSteering:
    def test_broadside_all_ones(self, ura):
        a = steering_vector(ura, Direction(0.0, 0.0), 20_000.0)
        assert np.allclose(a, 1.0)

    def test_half_wavelength_endfire(self):
        s = SensorSet(((0, 0), (1, 0)), GridSpec(nx=2, ny=1))
        f = max_frequency(s.grid.d)
        a = steering_vector(s, Direction(0.0, 90.0), f)
        assert a[0] == pytest.approx(1.0)
        assert a[1] == pytest.approx(-1.0, abs=1e-9)

    def test_single_sensor(self):
        s = SensorSet(((0, 0),), GridSpec(nx=1, ny=1))
        assert steering_vector(s, Direction(10.0, 50.0), 5000.0) == pytest.approx([1.0])

    def test_unit_magnitude(self, nested):
        a = steering_vector(nested, Direction(211.0, 67.0), 19_000.0)
        assert np.allclose(np.abs(a), 1.0)

    def test_warns_above_spatial_nyquist(self, ura):
        with pytest.warns(UserWarning):
            steering_vector(ura, Direction(0.0, 45.0), 30_000.0)

    def test_matrix_columns(self, ura):
        dirs = [Direction(0.0, 0.0), Direction(90.0, 45.0)]
        a = steering_matrix(ura, dirs, 18_000.0)
        assert a.shape == (64, 2)
        assert np.allclose(a[:, 0], steering_vector(ura, dirs[0], 18_000.0))

    def test_matrix_rejects_empty(self, ura):
        with pytest.raises(ValueError):
            steering_matrix(ura, [], 18_000.0)

    def test_two_sensor_broadside_endfire_matrix(self):
        s = SensorSet(((0, 0), (1, 0)), GridSpec(nx=2, ny=1))
        f = max_frequency(s.grid.d)
        a = steering_matrix(s, [Direction(0.0, 0.0), Direction(0.0, 90.0)], f)
        assert np.allclose(a, [[1, 1], [1, -1]], atol=1e-9)

    def test_full_rank_for_distinct_directions(self, ura, rng):
        dirs = random_directions(64, rng, 80.0)
        a = steering_matrix(ura, dirs, 20_000.0)
        assert np.linalg.matrix_rank(a) == 64


class TestHadamard:
    def test_order_two(self):
        assert np.array_equal(hadamard_codes(2), [[1, 1], [1, -1]])

    def test_rows_orthogonal(self):
        h = hadamard_codes(8)
        assert np.array_equal(h @ h.T, 8 * np.eye(8))

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            hadamard_codes(6)


class TestBandlimitAndMix:
    def test_power_containment(self):
        fs, b, fc = 48_000.0, 200.0, 20_000.0
        w = bandlimit_and_mix(hadamard_codes(8)[3], b, fc, fs, 0.5)
        spec = np.abs(np.fft.rfft(w)) ** 2
        freqs = np.fft.rfftfreq(len(w), 1 / fs)
        inside = spec[(freqs >= fc - b) & (freqs <= fc + b)].sum()
        assert inside / spec.sum() >= 0.99

    def test_all_ones_concentrates_at_carrier(self):
        fs, b, fc = 48_000.0, 200.0, 20_000.0
        w = bandlimit_and_mix(np.ones(8), b, fc, fs, 0.5)
        spec = np.abs(np.fft.rfft(w)) ** 2
        freqs = np.fft.rfftfreq(len(w), 1 / fs)
        near = spec[np.abs(freqs - fc) <= 25.0].sum()
        assert near / spec.sum() >= 0.99

    def test_distinct_rows_nearly_orthogonal(self):
        fs, b, fc = 48_000.0, 200.0, 20_000.0
        h = hadamard_codes(8)
        w1 = bandlimit_and_mix(h[1], b, fc, fs, 0.25)
        w2 = bandlimit_and_mix(h[2], b, fc, fs, 0.25)
        rho = abs(np.dot(w1, w2)) / (np.linalg.norm(w1) * np.linalg.norm(w2))
        assert rho < 0.1

    def test_nyquist_violation_raises(self):
        with pytest.raises(ValueError):
            bandlimit_and_mix(np.ones(4), 200.0, 23_950.0, 48_000.0, 0.1)


class TestSynthesizeScene:
    def test_broadside_channels_identical(self, ura):
        src = NarrowbandSource(Direction(0.0, 0.0), 20_000.0)
        data = synthesize_scene([src], ura, 48_000.0, 0.01, noise=None, seed=1)
        assert np.allclose(data, data[0], atol=1e-9)

    def test_spl_scaling(self, ura):
        # 94 dB SPL is 1.0024 Pa RMS.
        src = NarrowbandSource(Direction(0.0, 0.0), 1000.0, level_spl=94.0)
        data = synthesize_scene([src], ura, 48_000.0, 0.1, noise=None, seed=1)
        assert np.sqrt(np.mean(data[0] ** 2)) == pytest.approx(1.0024, abs=2e-3)
        assert spl_to_pressure(94.0) == pytest.approx(1.00237, abs=1e-4)

    def test_interchannel_phase_matches_model(self, ura):
        # Endfire tone: adjacent columns differ by pi * f / f_max.
        fs, f = 48_000.0, 20_000.0
        src = NarrowbandSource(Direction(0.0, 90.0), f)
        data = synthesize_scene([src], ura, fs, 0.05, noise=None, seed=2)
        from scipy.signal import hilbert
        analytic = hilbert(data[:2])[:, 200:-200]
        cross = np.mean(analytic[1] * np.conj(analytic[0]))
        expected = np.pi * f / max_frequency(ura.grid.d)
        assert np.angle(cross) == pytest.approx(expected, abs=1e-3)

    def test_linearity(self, nested):
        a = NarrowbandSource(Direction(20.0, 40.0), 19_500.0)
        b = NarrowbandSource(Direction(250.0, 70.0), 20_300.0)
        kw = dict(s=nested, fs=48_000.0, duration=0.02, noise=None, seed=7)
        both = synthesize_scene([a, b], **kw)
        alone = synthesize_scene([a], **kw) + synthesize_scene([b], **kw)
        assert np.allclose(both, alone, rtol=1e-9, atol=1e-12)

    def test_seeded_reproducibility(self, ura):
        src = NarrowbandSource(Direction(100.0, 30.0), 20_000.0)
        noise = NoiseSpec(snr_db=10.0, bandwidth=2000.0)
        one = synthesize_scene([src], ura, 48_000.0, 0.01, noise, seed=5)
        two = synthesize_scene([src], ura, 48_000.0, 0.01, noise, seed=5)
        assert np.array_equal(one, two)

    def test_inband_noise_level(self, ura):
        # White noise sized so that SNR inside the stated band hits the target.
        fs, band, snr = 48_000.0, 2000.0, 10.0
        src = NarrowbandSource(Direction(0.0, 0.0), 20_000.0, level_spl=60.0)
        noisy = synthesize_scene([src], ura, fs, 0.4, NoiseSpec(snr_db=snr, bandwidth=band), seed=3)
        clean = synthesize_scene([src], ura, fs, 0.4, noise=None, seed=3)
        noise_power = np.mean((noisy - clean) ** 2)
        inband = noise_power * band / (fs / 2)
        measured = 10 * np.log10(np.mean(clean[0] ** 2) / inband)
        assert measured == pytest.approx(snr, abs=0.2)

    def test_tone_above_nyquist_raises(self, ura):
        src = NarrowbandSource(Direction(0.0, 0.0), 24_000.0)
        with pytest.raises(ValueError):
            synthesize_scene([src], ura, 48_000.0, 0.01, None, seed=0)

    def test_snr_noise_needs_sources(self, ura):
        with pytest.raises(ValueError):
            synthesize_scene([], ura, 48_000.0, 0.01, NoiseSpec(snr_db=10.0), seed=0)

    def test_hadamard_waveform_delay_consistency(self, ura):
        # Coded sources go through the same steering model as tones: the
        # cross-spectrum phase at the carrier matches the tone prediction.
        fs, f = 48_000.0, 20_000.0
        src = NarrowbandSource(Direction(0.0, 90.0), f, waveform="hadamard",
                               code_row=2, bandwidth=200.0)
        data = synthesize_scene([src], ura, fs, 0.08, noise=None, seed=4)
        from scipy.signal import hilbert
        analytic = hilbert(data[:2])[:, 400:-400]
        cross = np.mean(analytic[1] * np.conj(analytic[0]))
        expected = np.pi * f / max_frequency(ura.grid.d)
        assert np.angle(cross) == pytest.approx(expected, abs=0.02)


class TestSnapshotMatrix:
    def test_validates_shape_and_map(self, ura):
        with pytest.raises(ValueError):
            SnapshotMatrix(np.zeros((4, 0)), 48_000.0)
        with pytest.raises(ValueError):
            SnapshotMatrix(np.zeros((3, 5)), 48_000.0, ura)
        snap = SnapshotMatrix(np.zeros((64, 5)), 48_000.0, ura)
        assert snap.n_channels == 64 and snap.n_samples == 5


class TestRandomDirections:
    def test_respects_cap_and_is_area_weighted(self, rng):
        dirs = random_directions(4000, rng, 60.0)
        els = np.array([d.elevation for d in dirs])
        assert els.max() <= 60.0
        # Area weighting: P(el <= 30) / P(el <= 60) = (1-cos30)/(1-cos60).
        frac = np.mean(els <= 30.0)
        assert frac == pytest.approx((1 - np.cos(np.pi / 6)) / 0.5, abs=0.05)
