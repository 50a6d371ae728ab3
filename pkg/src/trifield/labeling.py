"""Final per-point terrain / obstacle labeling against the refit planes.

Points in trusted nodes (terrain or completed) follow the one-sided rule:
signed plane distance <= eps3 is terrain, so points below the plane always
count as terrain. Points in nodes the search rejected (and points without
a node plane, or outside the field) are obstacle: those refit planes are
interpolations, not terrain the pipeline found, and labeling terrain
against them would erase exactly the false negatives completion exists to
fix (see README notes on the labeling rule).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import PointCloud, PointLabel, TriGridField
from .validation import as_xyz_array


@dataclass
class SegmentationResult:
    """Per-point labels plus the final field and run statistics."""

    labels: np.ndarray
    tgf: TriGridField
    stats: dict = field(default_factory=dict)
    timings_ms: dict = field(default_factory=dict)
    cloud: PointCloud | None = None

    @property
    def terrain_mask(self) -> np.ndarray:
        return self.labels == PointLabel.TERRAIN


def classify_against_field(
    tgf: TriGridField,
    xyz,
    eps3: float,
    two_sided: bool = False,
    node_ids: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Label arbitrary points against a refit field.

    Returns (labels, unrefit_count), where unrefit_count is the number of
    in-field points whose node had no plane to test against. ``node_ids``
    can pass a precomputed point-to-node assignment for the same points.
    """
    pts = as_xyz_array(xyz, allow_nonfinite=True)
    if node_ids is None:
        node_ids = tgf.locate(pts[:, :2])
        bad_z = ~np.isfinite(pts[:, 2])
        if bad_z.any():
            node_ids = node_ids.copy()
            node_ids[bad_z] = -1
    else:
        node_ids = np.asarray(node_ids)
    labels = np.full(len(pts), PointLabel.OBSTACLE, dtype=np.uint8)

    in_field = node_ids >= 0
    trusted_node = tgf.terrain_like() & tgf.has_plane
    unrefit = int(
        np.count_nonzero(
            tgf.terrain_like()[node_ids[in_field]]
            & ~tgf.has_plane[node_ids[in_field]]
        )
    )
    use = in_field.copy()
    use[in_field] = trusted_node[node_ids[in_field]]
    ids = node_ids[use]
    signed = np.einsum("ij,ij->i", pts[use], tgf.normals[ids]) + tgf.offsets[ids]
    is_terrain = np.abs(signed) <= eps3 if two_sided else signed <= eps3
    labels[use] = np.where(is_terrain, PointLabel.TERRAIN, PointLabel.OBSTACLE)
    return labels, unrefit


def label_points(tgf: TriGridField, cloud: PointCloud, eps3: float, two_sided: bool = False) -> SegmentationResult:
    """Label every cloud point against its own node's refit plane."""
    node_ids = tgf.point_nodes if len(tgf.point_nodes) == len(cloud.xyz) else None
    labels, unrefit = classify_against_field(
        tgf, cloud.xyz, eps3, two_sided=two_sided, node_ids=node_ids
    )
    stats = dict(tgf.stats)
    stats.update(
        {
            "points_terrain": int(np.count_nonzero(labels == PointLabel.TERRAIN)),
            "points_obstacle": int(np.count_nonzero(labels == PointLabel.OBSTACLE)),
            "points_unrefit_node": unrefit,
        }
    )
    for name, count in tgf.class_counts().items():
        stats[f"nodes_{name}"] = count
    return SegmentationResult(labels=labels, tgf=tgf, stats=stats, cloud=cloud)
