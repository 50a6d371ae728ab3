"""Tests for final point labeling against the refit node planes."""

import numpy as np
from trifield import PointCloud, TgfConfig, label_points, segment
from trifield.grid import NodeClass, PointLabel
from trifield.labeling import classify_against_field

from test_search import make_field, set_plane
from trifield.corners import refit_planes, resolve_corners


def flat_refit_field(n_cells=2, z=0.0):
    tgf = make_field(n_cells=n_cells, resolution=3.0)
    for node in range(tgf.n_nodes):
        set_plane(tgf, node, z=z)
    resolve_corners(tgf)
    refit_planes(tgf)
    return tgf


class TestThreshold:
    def test_point_below_threshold_is_terrain(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, 0.10]], eps3=0.125)
        assert labels[0] == PointLabel.TERRAIN

    def test_point_above_threshold_is_obstacle(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, 0.20]], eps3=0.125)
        assert labels[0] == PointLabel.OBSTACLE

    def test_point_exactly_on_plane_is_terrain(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, 0.0]], eps3=0.125)
        assert labels[0] == PointLabel.TERRAIN

    def test_one_sided_rule_accepts_points_below(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, -5.0]], eps3=0.125)
        assert labels[0] == PointLabel.TERRAIN

    def test_two_sided_option_bands_symmetrically(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(
            tgf, [[1.0, 1.0, -5.0], [1.0, 1.0, -0.1]], eps3=0.125, two_sided=True
        )
        assert labels.tolist() == [PointLabel.OBSTACLE, PointLabel.TERRAIN]

    def test_points_in_rejected_nodes_are_obstacle(self):
        tgf = flat_refit_field()
        node = tgf.locate(np.array([[1.0, 1.0]]))[0]
        tgf.node_class[node] = NodeClass.OTHER
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, 0.0]], eps3=0.125)
        assert labels[0] == PointLabel.OBSTACLE

    def test_completed_nodes_are_trusted(self):
        tgf = flat_refit_field()
        node = tgf.locate(np.array([[1.0, 1.0]]))[0]
        tgf.node_class[node] = NodeClass.COMPLETED
        labels, _ = classify_against_field(tgf, [[1.0, 1.0, 0.0]], eps3=0.125)
        assert labels[0] == PointLabel.TERRAIN

    def test_out_of_field_and_nonfinite_are_obstacle(self):
        tgf = flat_refit_field()
        labels, _ = classify_against_field(
            tgf, [[99.0, 99.0, 0.0], [np.nan, 0.0, 0.0]], eps3=0.125
        )
        assert labels.tolist() == [PointLabel.OBSTACLE, PointLabel.OBSTACLE]


class TestLabelPoints:
    def test_stats_and_counts(self):
        tgf = flat_refit_field()
        cloud = PointCloud(
            np.array([[1.0, 1.0, 0.0], [2.0, 1.0, 3.0], [50.0, 50.0, 0.0]])
        )
        result = label_points(tgf, cloud, eps3=0.125)
        assert result.labels.tolist() == [
            PointLabel.TERRAIN,
            PointLabel.OBSTACLE,
            PointLabel.OBSTACLE,
        ]
        assert result.stats["points_terrain"] == 1
        assert result.stats["points_obstacle"] == 2
        assert result.cloud is cloud

    def test_monotone_in_eps3(self):
        rng = np.random.default_rng(22)
        pts = np.column_stack(
            [rng.uniform(0, 20, 4000), rng.uniform(0, 20, 4000), rng.normal(0, 0.3, 4000)]
        )
        cfg = TgfConfig(resolution=4.0, seed_policy="lowest")
        prev = None
        for eps3 in (0.05, 0.15, 0.4, 1.0):
            res = segment(PointCloud(pts.copy()), cfg.replace(eps3=eps3))
            terrain = set(np.nonzero(res.labels == PointLabel.TERRAIN)[0].tolist())
            if prev is not None:
                assert prev <= terrain
            prev = terrain

    def test_vertical_shift_invariance(self):
        rng = np.random.default_rng(23)
        pts = np.column_stack(
            [rng.uniform(0, 20, 3000), rng.uniform(0, 20, 3000), rng.normal(0, 0.05, 3000)]
        )
        cfg = TgfConfig(resolution=4.0, seed_policy="lowest")
        a = segment(PointCloud(pts.copy()), cfg).labels
        b = segment(PointCloud(pts + [0, 0, 17.3]), cfg).labels
        assert np.array_equal(a, b)
