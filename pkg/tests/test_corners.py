"""Tests for corner elevation fitting and the per-node plane refit."""

import numpy as np
import pytest

from trifield import (
    PointCloud,
    TgfConfig,
    build_tgf,
    corner_elevation,
    plane_from_corners,
    refit_planes,
    resolve_corners,
)
from trifield.errors import NoResolvedCornersError
from trifield.grid import NodeClass

from test_search import make_field, set_plane

SQRT2 = np.sqrt(2)


class TestPlaneFromCorners:
    def test_flat_triangle(self):
        m, s, d = plane_from_corners([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        assert np.allclose(m, [1 / 3, 1 / 3, 0], atol=1e-12)
        assert np.allclose(s, [0, 0, 1], atol=1e-12)
        assert d == pytest.approx(0.0, abs=1e-12)

    def test_uniform_lift_changes_offset_only(self):
        m, s, d = plane_from_corners([[0, 0, 2], [1, 0, 2], [0, 1, 2]])
        assert np.allclose(s, [0, 0, 1], atol=1e-12)
        assert d == pytest.approx(-2.0, abs=1e-12)

    def test_tilted_triangle(self):
        m, s, d = plane_from_corners([[0, 0, 0], [1, 0, 1], [0, 1, 0]])
        assert np.allclose(s, [-SQRT2 / 2, 0, SQRT2 / 2], atol=1e-9)
        assert d == pytest.approx(0.0, abs=1e-9)

    def test_plane_passes_through_corners(self):
        rng = np.random.default_rng(20)
        corners = rng.normal(size=(50, 3, 3))
        corners[..., :2] *= 4  # keep xy spread comfortably non-collinear
        m, s, d = plane_from_corners(corners)
        residual = np.einsum("nij,nj->ni", corners, s) + d[:, None]
        assert np.abs(residual).max() < 1e-9
        assert (s[:, 2] >= 0).all()


class TestCornerElevation:
    def _flat_two_node_field(self, z0, z1, w0, w1):
        tgf = make_field(n_cells=1, resolution=3.0)
        set_plane(tgf, 0, z=z0, weight=w0)  # north
        set_plane(tgf, 1, z=z1, weight=w1)  # east
        return tgf

    def test_constant_field(self):
        tgf = self._flat_two_node_field(0.0, 0.0, 1.0, 1.0)
        shared = set(tgf.corner_ids[0]) & set(tgf.corner_ids[1])
        for cid in shared:
            assert corner_elevation(tgf, cid) == pytest.approx(0.0, abs=1e-12)

    def test_equal_weight_mean(self):
        tgf = self._flat_two_node_field(0.0, 1.0, 1.0, 1.0)
        shared = (set(tgf.corner_ids[0]) & set(tgf.corner_ids[1])).pop()
        assert corner_elevation(tgf, shared) == pytest.approx(0.5, abs=1e-12)

    def test_weighted_mean(self):
        tgf = self._flat_two_node_field(0.0, 1.0, 0.9, 0.1)
        shared = (set(tgf.corner_ids[0]) & set(tgf.corner_ids[1])).pop()
        assert corner_elevation(tgf, shared) == pytest.approx(0.1, abs=1e-12)

    def test_unresolvable_corner_raises(self):
        tgf = make_field(n_cells=1)
        set_plane(tgf, 0, z=0.0)
        lonely = [c for c in range(tgf.n_corners) if c not in tgf.corner_ids[0]][0]
        with pytest.raises(NoResolvedCornersError):
            corner_elevation(tgf, lonely)


class TestResolveCorners:
    def test_fallback_copies_nearest_resolved(self):
        tgf = make_field(n_cells=3, resolution=3.0)
        set_plane(tgf, 0, z=1.5)  # only the first cell's north node qualifies
        resolve_corners(tgf)
        assert not np.isnan(tgf.corner_z).any()
        assert tgf.corner_resolved.sum() == 3
        assert tgf.corner_fallback.sum() == tgf.n_corners - 3
        assert np.allclose(tgf.corner_z, 1.5, atol=1e-12)
        assert tgf.stats["corners_fallback"] == tgf.n_corners - 3

    def test_zero_weight_nodes_do_not_resolve(self):
        tgf = make_field(n_cells=1)
        set_plane(tgf, 0, z=2.0, weight=0.0)
        with pytest.raises(NoResolvedCornersError):
            resolve_corners(tgf)

    def test_no_terrain_at_all(self):
        tgf = make_field(n_cells=2)
        with pytest.raises(NoResolvedCornersError):
            resolve_corners(tgf)

    def test_completed_nodes_participate(self):
        tgf = make_field(n_cells=1)
        set_plane(tgf, 0, z=1.0, node_class=NodeClass.COMPLETED)
        resolve_corners(tgf)
        assert np.allclose(tgf.corner_z, 1.0, atol=1e-12)


class TestRefit:
    def _refit_field(self, surface, extent=40.0, resolution=2.0, seed=21):
        rng = np.random.default_rng(seed)
        n = int(extent * extent * 12)
        xy = rng.uniform(0, extent, size=(n, 2))
        z = surface(xy[:, 0], xy[:, 1])
        pts = np.column_stack([xy, z])
        cfg = TgfConfig(resolution=resolution, seed_policy="lowest", eps1=0.15)
        tgf = build_tgf(PointCloud(pts), cfg)
        from trifield.plane import fit_and_classify
        from trifield.search import select_seeds, traverse

        fit_and_classify(tgf, pts, cfg)
        traverse(tgf, select_seeds(tgf, cfg), cfg)
        resolve_corners(tgf)
        return refit_planes(tgf)

    def test_refit_planes_pass_through_corners(self):
        tgf = self._refit_field(lambda x, y: 0.15 * np.sin(x / 4) * np.sin(y / 5))
        corners = np.concatenate(
            [tgf.corner_xy[tgf.corner_ids], tgf.corner_z[tgf.corner_ids][..., None]],
            axis=2,
        )
        residual = np.einsum("nij,nj->ni", corners, tgf.normals) + tgf.offsets[:, None]
        assert np.abs(residual).max() < 1e-9

    def test_edge_adjacent_planes_agree_on_shared_corners(self):
        tgf = self._refit_field(lambda x, y: 0.2 * np.sin(x / 3) + 0.1 * np.cos(y / 4))
        checked = 0
        for i in range(tgf.n_nodes):
            for j in tgf.neighbors[i]:
                if j < 0 or j < i:
                    continue
                shared = np.array(sorted(set(tgf.corner_ids[i]) & set(tgf.corner_ids[j])))
                assert len(shared) == 2
                pts = np.column_stack([tgf.corner_xy[shared], tgf.corner_z[shared]])
                zi = pts @ tgf.normals[i] + tgf.offsets[i]
                zj = pts @ tgf.normals[j] + tgf.offsets[j]
                assert np.abs(zi).max() < 1e-9 and np.abs(zj).max() < 1e-9
                checked += 1
        assert checked > 100

    def test_weights_and_classes_preserved(self):
        tgf = make_field(n_cells=2)
        for node in range(tgf.n_nodes):
            set_plane(tgf, node, z=0.5, weight=0.7)
        tgf.node_class[3] = NodeClass.OTHER
        resolve_corners(tgf)
        refit_planes(tgf)
        assert (tgf.weights == 0.7).all()
        assert tgf.node_class[3] == NodeClass.OTHER
        assert tgf.has_plane.all()

    def test_upward_normals_on_terrain_fields(self):
        tgf = self._refit_field(lambda x, y: 0.1 * np.sin(x / 5))
        assert (tgf.normals[:, 2] > 0).all()
