import subprocess
import sys

import pytest
from click.testing import CliRunner

from sparsedoa.cli import cli
from sparsedoa.geometry import load_sensor_set
from sparsedoa.io import write_recording
from sparsedoa.wavefield import Direction, NarrowbandSource, NoiseSpec, synthesize_scene


@pytest.fixture
def runner():
    return CliRunner()


class TestGeometryCommand:
    def test_list(self, runner):
        result = runner.invoke(cli, ["geometry", "--list"])
        assert result.exit_code == 0
        assert "Open-Box" in result.output

    def test_emit_parses_back(self, runner):
        result = runner.invoke(cli, ["geometry", "--kind", "Nested"])
        assert result.exit_code == 0
        sensors = load_sensor_set(result.output)
        assert len(sensors) == 25


class TestCoarrayCommand:
    def test_emits_segment_and_offsets(self, runner):
        result = runner.invoke(cli, ["coarray", "--kind", "Open-Box"])
        assert result.exit_code == 0
        head = result.output.splitlines()[0]
        assert "segment_mx=7" in head and "segment_my=7" in head
        assert "0 0 22" in result.output


class TestBeampatternCommand:
    def test_table_header_and_rows(self, runner):
        result = runner.invoke(cli, ["beampattern", "--elevation-points", "25",
                                     "--azimuth-step", "4.0"])
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[0].startswith("geometry,sensors,mlm_db")
        assert len(lines) == 7


class TestEstimateCommand:
    def test_scene_flow(self, runner, tmp_path):
        cfg = tmp_path / "scene.yaml"
        cfg.write_text("""
name: one-scene
seed: 11
sampling: {fs: 48000.0, snapshots: 500, chunk: 2048}
geometries: [Nested]
snr_db: [30]
source: {frequency: 20000.0, direction: {azimuth: 120.0, elevation: 35.0}}
estimator: {name: esprit, smoothing: auto}
""")
        result = runner.invoke(cli, ["estimate", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        assert "truth azimuth=120.000" in result.output
        error = float(result.output.rsplit("error=", 1)[1].split()[0])
        assert error < 1.0

    def test_requires_exactly_one_input(self, runner):
        assert runner.invoke(cli, ["estimate"]).exit_code != 0

    def test_recording_flow(self, runner, tmp_path, ura):
        src = NarrowbandSource(Direction(45.0, 30.0), 20_000.0)
        data = synthesize_scene([src], ura, 48_000.0, 0.1,
                                NoiseSpec(snr_db=30.0, bandwidth=2_000.0), seed=0)
        path = tmp_path / "take.rec"
        write_recording(path, data, 48_000.0)
        result = runner.invoke(cli, ["estimate", "--recording", str(path),
                                     "--estimator", "esprit"])
        assert result.exit_code == 0
        fields = dict(kv.split("=") for kv in result.output.split())
        assert abs(float(fields["azimuth"]) - 45.0) < 2.0
        assert abs(float(fields["elevation"]) - 30.0) < 1.0


class TestExitCodes:
    def run(self, *args):
        return subprocess.run([sys.executable, "-m", "sparsedoa.cli", *args],
                              capture_output=True, text=True)

    def test_success(self):
        assert self.run("geometry", "--list").returncode == 0

    def test_config_error_is_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("geometries: [Hexagon]\n")
        proc = self.run("montecarlo", "--config", str(bad))
        assert proc.returncode == 2

    def test_usage_error_is_2(self):
        assert self.run("coarray").returncode == 2

    def test_data_error_is_3(self, tmp_path):
        missing = tmp_path / "missing.rec"
        proc = self.run("estimate", "--recording", str(missing))
        assert proc.returncode == 3

    def test_truncated_recording_is_3(self, tmp_path, rng):
        path = tmp_path / "take.rec"
        write_recording(path, rng.normal(size=(64, 50)), 48_000.0)
        path.write_bytes(path.read_bytes()[:-8])
        proc = self.run("estimate", "--recording", str(path))
        assert proc.returncode == 3


class TestMontecarloCommand:
    def test_tiny_run_writes_outputs(self, runner, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("""
name: cli-tiny
seed: 3
trials: 2
sampling: {fs: 48000.0, snapshots: 300, chunk: 1024}
geometries: [URA]
snr_db: [25]
source: {frequency: 20000.0, direction: random, max_elevation: 60.0}
estimator: {name: esprit}
""")
        outdir = tmp_path / "out"
        result = runner.invoke(cli, ["montecarlo", "--config", str(cfg),
                                     "-o", str(outdir)])
        assert result.exit_code == 0, result.output
        assert (outdir / "results.csv").exists()
        assert (outdir / "manifest.json").exists()
        assert "URA@25dB" in result.output


class TestMultisourceDemoCommand:
    def test_single_run(self, runner):
        result = runner.invoke(cli, ["multisource-demo", "--seed", "4"])
        assert result.exit_code == 0
        assert "1/1 runs" in result.output
