"""Tests for the command-line frontend.

Exit codes under test: 0 ok, 2 input/config error, 3 data-consistency
error.
"""

import json

import numpy as np
import pytest

from trifield.cli import main
from trifield.io import read_class_file, read_result_labels, write_scan_bin
from trifield.synth import SceneSpec


@pytest.fixture
def flat_scan(tmp_path):
    rng = np.random.default_rng(70)
    n = 4000
    xyz = np.column_stack(
        [rng.uniform(-8, 8, n), rng.uniform(-8, 8, n), rng.normal(0, 0.02, n)]
    )
    path = tmp_path / "scan.bin"
    write_scan_bin(xyz, path)
    return path, n


def parse_kv(output):
    pairs = {}
    for line in output.strip().splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            pairs[key] = value
    return pairs


class TestSegment:
    def test_happy_path(self, flat_scan, tmp_path, capsys):
        scan, n = flat_scan
        out = tmp_path / "labels.txt"
        code = main(
            ["segment", "--input", str(scan), "--preset", "single-scan",
             "--output", str(out), "--format", "labeled-text"]
        )
        assert code == 0
        stats = parse_kv(capsys.readouterr().out)
        assert "time_ms.total" in stats
        assert int(stats["stats.nodes_terrain"]) > 0
        assert out.exists()

    def test_no_completion_flag(self, flat_scan, tmp_path, capsys):
        scan, n = flat_scan
        code = main(["segment", "--input", str(scan), "--no-completion"])
        assert code == 0
        stats = parse_kv(capsys.readouterr().out)
        assert stats["stats.nodes_completed"] == "0"

    def test_binary_output_aligned(self, flat_scan, tmp_path):
        scan, n = flat_scan
        out = tmp_path / "labels.bin"
        assert main(
            ["segment", "--input", str(scan), "--output", str(out), "--format", "labeled-binary"]
        ) == 0
        assert len(read_result_labels(out)) == n

    def test_bad_path_exit_2(self, capsys):
        code = main(["segment", "--input", "/nonexistent/scan.bin"])
        assert code == 2
        assert "IoError" in capsys.readouterr().err

    def test_config_file_override(self, flat_scan, tmp_path, capsys):
        scan, _ = flat_scan
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("resolution = 2.0\ncompletion_enabled = false\n")
        assert main(["segment", "--input", str(scan), "--config", str(cfg)]) == 0
        stats = parse_kv(capsys.readouterr().out)
        assert stats["stats.nodes_completed"] == "0"
        assert stats["stats.cells"] == "(8, 8)"


class TestEval:
    def _pred_and_gt(self, tmp_path, n=100, perfect=True):
        rng = np.random.default_rng(71)
        xyz = rng.uniform(-5, 5, size=(n, 3))
        labels = rng.integers(0, 2, n).astype(np.uint8)
        pred = tmp_path / "pred.txt"
        with open(pred, "w") as fh:
            for (x, y, z), lab in zip(xyz, labels):
                fh.write(f"{x} {y} {z} {lab}\n")
        gt = tmp_path / "gt.cls"
        gt_classes = labels if perfect else 1 - labels
        gt_classes.astype(np.uint8).tofile(gt)
        return pred, gt

    def test_perfect_prediction(self, tmp_path, capsys):
        pred, gt = self._pred_and_gt(tmp_path)
        code = main(["eval", "--pred", str(pred), "--gt-classes", str(gt),
                     "--policy", "without-ambiguous"])
        assert code == 0
        assert capsys.readouterr().out.strip() == "100.0 100.0 100.0 100.0"

    def test_both_policies_run(self, tmp_path, capsys):
        rng = np.random.default_rng(72)
        n = 200
        xyz = rng.uniform(-5, 5, size=(n, 3))
        pred_labels = rng.integers(0, 2, n).astype(np.uint8)
        gt_classes = rng.integers(0, 3, n).astype(np.uint8)
        pred = tmp_path / "pred.txt"
        with open(pred, "w") as fh:
            for (x, y, z), lab in zip(xyz, pred_labels):
                fh.write(f"{x} {y} {z} {lab}\n")
        gt = tmp_path / "gt.cls"
        gt_classes.tofile(gt)
        rows = []
        for policy in ("with-ambiguous", "without-ambiguous"):
            code = main(["eval", "--pred", str(pred), "--gt-classes", str(gt),
                         "--dataset-spec", "semantickitti", "--policy", policy])
            assert code == 0
            rows.append(capsys.readouterr().out.strip())
        assert rows[0] != rows[1]

    def test_count_mismatch_exit_3(self, tmp_path, capsys):
        pred, gt = self._pred_and_gt(tmp_path)
        short = tmp_path / "short.cls"
        read_class_file(gt)[:50].tofile(short)
        assert main(["eval", "--pred", str(pred), "--gt-classes", str(short)]) == 3

    def test_missing_spec_exit_2(self, tmp_path):
        pred, gt = self._pred_and_gt(tmp_path)
        code = main(["eval", "--pred", str(pred), "--gt-labels", str(gt),
                     "--dataset-spec", "/missing/spec.cfg"])
        assert code == 2


class TestAccumulate:
    def _dataset(self, tmp_path, n_frames=4, pts=60):
        rng = np.random.default_rng(73)
        scans = tmp_path / "scans"
        labels = tmp_path / "labels"
        scans.mkdir()
        labels.mkdir()
        for i in range(n_frames):
            xyz = rng.uniform(0, 5, size=(pts, 3))
            write_scan_bin(xyz, scans / f"{i:06d}.bin")
            np.full(pts, 40, dtype="<u4").tofile(labels / f"{i:06d}.label")
        poses = tmp_path / "poses.txt"
        with open(poses, "w") as fh:
            for i in range(n_frames):
                fh.write(f"1 0 0 {i * 10} 0 1 0 0 0 0 1 0\n")
        return scans, labels, poses

    def test_two_maps(self, tmp_path, capsys):
        scans, labels, poses = self._dataset(tmp_path, n_frames=4)
        out = tmp_path / "maps"
        code = main(
            ["accumulate", "--scans-dir", str(scans), "--labels-dir", str(labels),
             "--poses", str(poses), "--frames-per-map", "2", "--voxel", "0.2",
             "--dataset-spec", "semantickitti", "--out-dir", str(out)]
        )
        assert code == 0
        assert (out / "partial_map_000.bin").exists()
        assert (out / "partial_map_001.bin").exists()
        assert (out / "partial_map_001.cls").exists()
        assert "maps=2" in capsys.readouterr().out

    def test_empty_dir_exit_2(self, tmp_path):
        (tmp_path / "empty").mkdir()
        code = main(
            ["accumulate", "--scans-dir", str(tmp_path / "empty"),
             "--labels-dir", str(tmp_path / "empty"), "--poses", "x",
             "--frames-per-map", "2", "--dataset-spec", "semantickitti",
             "--out-dir", str(tmp_path / "o")]
        )
        assert code == 2

    def test_pose_shortage_exit_3(self, tmp_path):
        scans, labels, poses = self._dataset(tmp_path, n_frames=4)
        poses.write_text("1 0 0 0 0 1 0 0 0 0 1 0\n")
        code = main(
            ["accumulate", "--scans-dir", str(scans), "--labels-dir", str(labels),
             "--poses", str(poses), "--frames-per-map", "2",
             "--dataset-spec", "semantickitti", "--out-dir", str(tmp_path / "o")]
        )
        assert code == 3


class TestSweepAndSynth:
    def _scene_file(self, tmp_path):
        scenes = [
            SceneSpec(kind="flat", extent=12, density=20, rng_seed=i).to_dict()
            for i in range(2)
        ]
        path = tmp_path / "scenes.json"
        path.write_text(json.dumps(scenes))
        return path

    def test_sweep_table(self, tmp_path, capsys):
        scenes = self._scene_file(tmp_path)
        out = tmp_path / "table.tsv"
        code = main(
            ["sweep", "--param", "r_t", "--values", "3,4", "--modes", "on,off",
             "--scenes", str(scenes), "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 1 + 4  # header + 2 values x 2 modes
        assert lines[0].split("\t")[0] == "param"

    def test_sweep_single_value_rejected(self, tmp_path):
        scenes = self._scene_file(tmp_path)
        code = main(["sweep", "--param", "r_t", "--values", "4", "--scenes", str(scenes)])
        assert code == 2

    def test_synth_segment_eval_chain(self, tmp_path, capsys):
        scan = tmp_path / "scene.bin"
        oracle = tmp_path / "scene.oracle"
        assert main(
            ["synth", "--kind", "flat", "--extent", "18", "--density", "30",
             "--noise", "0.02", "--out", str(scan), "--oracle-out", str(oracle)]
        ) == 0
        capsys.readouterr()
        pred = tmp_path / "pred.bin"
        assert main(
            ["segment", "--input", str(scan), "--preset", "single-scan",
             "--output", str(pred), "--format", "labeled-binary"]
        ) == 0
        capsys.readouterr()
        assert main(
            ["eval", "--pred", str(pred), "--pred-format", "labeled-binary",
             "--scan", str(scan), "--gt-classes", str(oracle),
             "--policy", "without-ambiguous"]
        ) == 0
        row = capsys.readouterr().out.strip().split()
        assert len(row) == 4
        assert all(float(v) > 99.0 for v in row)

    def test_synth_pit_unobserved(self, tmp_path, capsys):
        out = tmp_path / "pit.bin"
        oracle = tmp_path / "pit.oracle"
        code = main(
            ["synth", "--kind", "pit", "--observed", "false", "--radius", "4",
             "--extent", "16", "--density", "10", "--out", str(out),
             "--oracle-out", str(oracle)]
        )
        assert code == 0
        from trifield.io import read_scan_bin

        cloud = read_scan_bin(out)
        assert len(cloud) > 0
        inside = np.hypot(cloud.xyz[:, 0], cloud.xyz[:, 1]) < 4.0
        assert inside.sum() == 0
        assert len(read_class_file(oracle)) == len(cloud)
