"""Tri-grid field construction: a triangulated grid graph over the xy-plane.

Each square cell of side ``resolution`` is split by its two diagonals into
four triangular nodes (north / east / south / west, all sharing the cell
center as apex). Nodes own the points whose xy-projection falls inside
them, a local planar model once fitted, and edges to the triangles they
share a full edge with: two inside the cell plus at most one across the
cell border.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .config import TgfConfig
from .errors import EmptyCloudError, InvalidNodeIdError, NearVerticalPlaneError
from .validation import as_xy_array, as_xyz_array

# In-cell triangle order. Ties on a shared boundary go to the lowest index.
TRI_NORTH, TRI_EAST, TRI_SOUTH, TRI_WEST = 0, 1, 2, 3

# Triangle centroids in cell-local units of the resolution.
_LOCAL_CENTROIDS = np.array(
    [
        [0.5, 5.0 / 6.0],  # north
        [5.0 / 6.0, 0.5],  # east
        [0.5, 1.0 / 6.0],  # south
        [1.0 / 6.0, 0.5],  # west
    ]
)

_MIN_NORMAL_Z = 1e-6


class NodeClass(IntEnum):
    """Lifecycle class of a node: candidates become terrain or other after
    the initial fit, search demotes unreached terrain to other, and
    completion promotes qualifying other nodes to completed."""

    CANDIDATE = 0
    TERRAIN = 1
    OTHER = 2
    COMPLETED = 3


class PointLabel(IntEnum):
    OBSTACLE = 0
    TERRAIN = 1


@dataclass
class PointCloud:
    """A flat point set with optional raw semantic ids per point."""

    xyz: np.ndarray
    labels: Optional[np.ndarray] = None
    frame_id: Optional[int] = None
    dropped: int = 0  # non-finite rows removed at read time

    def __post_init__(self):
        self.xyz = as_xyz_array(self.xyz, allow_nonfinite=True)
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if len(self.labels) != len(self.xyz):
                raise ValueError(
                    f"labels length {len(self.labels)} != point count {len(self.xyz)}"
                )

    def __len__(self) -> int:
        return len(self.xyz)


@dataclass
class PlanarModel:
    """Plane through ``mean`` with unit ``normal`` (z >= 0) and offset
    ``d = -normal . mean`` so that ``normal . p + d == 0`` on the plane."""

    normal: np.ndarray
    offset: float
    mean: np.ndarray

    def height_at(self, xy) -> float:
        return plane_height_at(self, xy)

    def signed_distance(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.normal + self.offset


@dataclass
class TgfNode:
    """Read-only view of one triangular node of the field."""

    id: int
    center: np.ndarray
    corner_ids: np.ndarray
    point_indices: np.ndarray
    plane: Optional[PlanarModel]
    eigenvalues: np.ndarray
    weight: float
    node_class: NodeClass


@dataclass
class TriGridField:
    """The global graph: triangle nodes over an xy grid with shared corners.

    Node arrays are stored columnar (one row per node) so the pipeline
    stages can run vectorized; ``node(i)`` materializes a ``TgfNode`` view
    for inspection.
    """

    origin: np.ndarray
    resolution: float
    nx: int
    ny: int
    centers: np.ndarray        # (M, 2) triangle centroids
    corner_ids: np.ndarray     # (M, 3) indices into corner_xy
    neighbors: np.ndarray      # (M, 3) edge-adjacent node ids, -1 when absent
    corner_xy: np.ndarray      # (C, 2)
    point_nodes: np.ndarray    # (N,) node id per cloud point, -1 out of field
    normals: np.ndarray        # (M, 3)
    offsets: np.ndarray        # (M,)
    means: np.ndarray          # (M, 3)
    eigenvalues: np.ndarray    # (M, 3) descending
    weights: np.ndarray        # (M,)
    node_class: np.ndarray     # (M,) NodeClass values
    has_plane: np.ndarray      # (M,) bool
    corner_z: np.ndarray       # (C,) NaN until corners are resolved
    corner_resolved: np.ndarray
    corner_fallback: np.ndarray
    stats: dict = field(default_factory=dict)
    _bucket_order: Optional[np.ndarray] = None
    _bucket_starts: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return len(self.centers)

    @property
    def n_corners(self) -> int:
        return len(self.corner_xy)

    def check_id(self, node_id: int) -> int:
        node_id = int(node_id)
        if not 0 <= node_id < self.n_nodes:
            raise InvalidNodeIdError(
                f"node id {node_id} outside field of {self.n_nodes} nodes"
            )
        return node_id

    def node(self, node_id: int) -> TgfNode:
        i = self.check_id(node_id)
        return TgfNode(
            id=i,
            center=self.centers[i],
            corner_ids=self.corner_ids[i],
            point_indices=self.node_points(i),
            plane=self.plane(i),
            eigenvalues=self.eigenvalues[i],
            weight=float(self.weights[i]),
            node_class=NodeClass(int(self.node_class[i])),
        )

    def plane(self, node_id: int) -> Optional[PlanarModel]:
        i = self.check_id(node_id)
        if not self.has_plane[i]:
            return None
        return PlanarModel(
            normal=self.normals[i].copy(),
            offset=float(self.offsets[i]),
            mean=self.means[i].copy(),
        )

    def node_points(self, node_id: int) -> np.ndarray:
        """Indices into the source cloud of the points bucketed in a node."""
        i = self.check_id(node_id)
        if self._bucket_order is None:
            self._build_buckets()
        return self._bucket_order[self._bucket_starts[i]:self._bucket_starts[i + 1]]

    def _build_buckets(self):
        valid = self.point_nodes >= 0
        idx = np.nonzero(valid)[0]
        order = np.argsort(self.point_nodes[valid], kind="stable")
        self._bucket_order = idx[order]
        counts = np.bincount(self.point_nodes[valid], minlength=self.n_nodes)
        self._bucket_starts = np.concatenate(([0], np.cumsum(counts)))

    def terrain_like(self) -> np.ndarray:
        """Mask of nodes whose model is trusted as terrain."""
        return (self.node_class == NodeClass.TERRAIN) | (
            self.node_class == NodeClass.COMPLETED
        )

    def class_counts(self) -> dict:
        return {
            cls.name.lower(): int(np.count_nonzero(self.node_class == cls))
            for cls in NodeClass
        }

    def locate(self, xy) -> np.ndarray:
        """Map xy positions to node ids; -1 for out-of-field or non-finite."""
        xy = as_xy_array(xy, allow_nonfinite=True)
        rel_x = xy[:, 0] - self.origin[0]
        rel_y = xy[:, 1] - self.origin[1]
        r = self.resolution
        with np.errstate(invalid="ignore"):
            outside = ~(
                (rel_x >= 0) & (rel_y >= 0) & (rel_x <= self.nx * r) & (rel_y <= self.ny * r)
            )
        if outside.any():
            rel_x = np.where(outside, 0.0, rel_x)
            rel_y = np.where(outside, 0.0, rel_y)
        ids = self._locate_core(rel_x, rel_y)
        if outside.any():
            ids[outside] = -1
        return ids

    def _locate_core(self, rel_x, rel_y) -> np.ndarray:
        """Node ids for grid-relative positions known to lie in the field
        (non-negative, within the grid span)."""
        r = self.resolution
        inv_r = 1.0 / r
        # truncation == floor for non-negative grid-relative coordinates
        ix = np.minimum((rel_x * inv_r).astype(np.int64), self.nx - 1)
        iy = np.minimum((rel_y * inv_r).astype(np.int64), self.ny - 1)
        u = rel_x - ix * r
        v = rel_y - iy * r
        # Diagonal halves, with boundary ties resolved to the lowest
        # triangle index (north beats east/west, south beats west).
        far = u + v >= r
        tri = np.where(
            far,
            np.where(v >= u, TRI_NORTH, TRI_EAST),
            np.where(v > u, TRI_WEST, TRI_SOUTH),
        )
        return 4 * (iy * self.nx + ix) + tri


def build_tgf(cloud: PointCloud, config: TgfConfig) -> TriGridField:
    """Embed a cloud into a fresh tri-grid field.

    The grid covers the xy bounding box of the finite points, expanded to a
    whole number of cells with the origin at the min corner. Non-finite
    points are dropped (counted in ``stats``); a bounding box smaller than
    one cell still yields a 1x1 grid, flagged as ``degenerate_extent``.
    """
    config.validate()
    xyz = cloud.xyz
    finite = np.isfinite(xyz).all(axis=1)
    n_finite = int(np.count_nonzero(finite))
    if n_finite == 0:
        raise EmptyCloudError("no finite points in cloud")
    xy = xyz[finite, :2]
    mins = xy.min(axis=0)
    maxs = xy.max(axis=0)
    extent = maxs - mins
    r = float(config.resolution)
    nx = max(1, int(math.ceil(extent[0] / r - 1e-12)))
    ny = max(1, int(math.ceil(extent[1] / r - 1e-12)))
    degenerate = bool(extent[0] < r and extent[1] < r)

    n_cells = nx * ny
    n_nodes = 4 * n_cells
    cell_ix, cell_iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    cell_ix = cell_ix.ravel()
    cell_iy = cell_iy.ravel()

    # node id = 4 * (iy * nx + ix) + t, cells enumerated row-major by iy
    centers = np.empty((n_nodes, 2))
    cell_origin = np.stack([cell_ix, cell_iy], axis=1) * r + mins
    for t in range(4):
        centers[t::4] = cell_origin + _LOCAL_CENTROIDS[t] * r

    corner_xy, corner_ids = _build_corners(mins, r, nx, ny, n_cells, cell_ix, cell_iy)
    neighbors = _build_neighbors(nx, ny)

    field_ = TriGridField(
        origin=mins,
        resolution=r,
        nx=nx,
        ny=ny,
        centers=centers,
        corner_ids=corner_ids,
        neighbors=neighbors,
        corner_xy=corner_xy,
        point_nodes=np.full(len(xyz), -1, dtype=np.int64),
        normals=np.full((n_nodes, 3), np.nan),
        offsets=np.full(n_nodes, np.nan),
        means=np.full((n_nodes, 3), np.nan),
        eigenvalues=np.zeros((n_nodes, 3)),
        weights=np.zeros(n_nodes),
        node_class=np.full(n_nodes, NodeClass.CANDIDATE, dtype=np.int8),
        has_plane=np.zeros(n_nodes, dtype=bool),
        corner_z=np.full(len(corner_xy), np.nan),
        corner_resolved=np.zeros(len(corner_xy), dtype=bool),
        corner_fallback=np.zeros(len(corner_xy), dtype=bool),
    )
    # Finite points always fall inside the grid it was sized from.
    ids = field_._locate_core(xy[:, 0] - mins[0], xy[:, 1] - mins[1])
    if n_finite == len(xyz):
        field_.point_nodes = ids
    else:
        field_.point_nodes[finite] = ids
    field_.stats = {
        "points_total": len(xyz),
        "points_dropped_nonfinite": len(xyz) - n_finite,
        "points_out_of_bounds": int(np.count_nonzero(field_.point_nodes == -1))
        - (len(xyz) - n_finite),
        "degenerate_extent": degenerate,
        "cells": (nx, ny),
    }
    return field_


def _build_corners(origin, r, nx, ny, n_cells, cell_ix, cell_iy):
    lat_x, lat_y = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="xy")
    lattice = np.stack([lat_x.ravel(), lat_y.ravel()], axis=1) * r + origin
    centers = (np.stack([cell_ix, cell_iy], axis=1) + 0.5) * r + origin
    corner_xy = np.concatenate([lattice, centers], axis=0)

    n_lat = (nx + 1) * (ny + 1)

    def lat_id(i, j):
        return j * (nx + 1) + i

    center_id = n_lat + np.arange(n_cells)
    ix, iy = cell_ix, cell_iy
    corner_ids = np.empty((4 * n_cells, 3), dtype=np.int64)
    corner_ids[TRI_NORTH::4] = np.stack(
        [lat_id(ix, iy + 1), lat_id(ix + 1, iy + 1), center_id], axis=1
    )
    corner_ids[TRI_EAST::4] = np.stack(
        [lat_id(ix + 1, iy), lat_id(ix + 1, iy + 1), center_id], axis=1
    )
    corner_ids[TRI_SOUTH::4] = np.stack(
        [lat_id(ix, iy), lat_id(ix + 1, iy), center_id], axis=1
    )
    corner_ids[TRI_WEST::4] = np.stack(
        [lat_id(ix, iy), lat_id(ix, iy + 1), center_id], axis=1
    )
    return corner_xy, corner_ids


def _build_neighbors(nx, ny):
    n_cells = nx * ny
    cell = np.arange(n_cells)
    ix = cell % nx
    iy = cell // nx
    base = 4 * cell
    nbrs = np.full((4 * n_cells, 3), -1, dtype=np.int64)
    # Within a cell, each triangle shares an edge with the two rotationally
    # adjacent ones (never the opposite one).
    nbrs[TRI_NORTH::4, 0] = base + TRI_EAST
    nbrs[TRI_NORTH::4, 1] = base + TRI_WEST
    nbrs[TRI_EAST::4, 0] = base + TRI_NORTH
    nbrs[TRI_EAST::4, 1] = base + TRI_SOUTH
    nbrs[TRI_SOUTH::4, 0] = base + TRI_EAST
    nbrs[TRI_SOUTH::4, 1] = base + TRI_WEST
    nbrs[TRI_WEST::4, 0] = base + TRI_NORTH
    nbrs[TRI_WEST::4, 1] = base + TRI_SOUTH
    # Across the shared cell edge: north<->south and east<->west pairs.
    up = iy + 1 < ny
    nbrs[base[up] + TRI_NORTH, 2] = base[up] + 4 * nx + TRI_SOUTH
    down = iy > 0
    nbrs[base[down] + TRI_SOUTH, 2] = base[down] - 4 * nx + TRI_NORTH
    right = ix + 1 < nx
    nbrs[base[right] + TRI_EAST, 2] = base[right] + 4 + TRI_WEST
    left = ix > 0
    nbrs[base[left] + TRI_WEST, 2] = base[left] - 4 + TRI_EAST
    return nbrs


def node_neighbors(tgf: TriGridField, node_id: int) -> list[int]:
    """Ids of the triangles sharing a full edge with ``node_id``."""
    i = tgf.check_id(node_id)
    row = tgf.neighbors[i]
    return [int(j) for j in row if j >= 0]


def plane_height_at(plane: PlanarModel, xy):
    """Height of a plane above xy; undefined for near-vertical planes."""
    s = plane.normal
    if abs(s[2]) <= _MIN_NORMAL_Z:
        raise NearVerticalPlaneError(
            f"plane normal z-component {s[2]:.2e} too small for height query"
        )
    xy = np.asarray(xy, dtype=float)
    z = -(plane.offset + s[0] * xy[..., 0] + s[1] * xy[..., 1]) / s[2]
    return float(z) if z.ndim == 0 else z
