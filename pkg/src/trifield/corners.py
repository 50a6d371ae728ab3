"""Weighted corner elevation fitting and the global per-node plane refit.

Shared corners get a traversability-weighted average of the heights the
adjacent trusted node planes predict there; every node plane is then refit
exactly through its three corners. Because edge-adjacent triangles share
two corners, the refit surface is continuous across edges.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoResolvedCornersError
from .grid import TriGridField

_MIN_NORMAL_Z = 1e-6


def corner_elevation(tgf: TriGridField, corner_id: int) -> float:
    """Weighted mean of the adjacent trusted planes' heights at one corner.

    Raises when no adjacent node qualifies; field-level resolution with the
    nearest-corner fallback lives in :func:`resolve_corners`.
    """
    cid = int(corner_id)
    if not 0 <= cid < tgf.n_corners:
        raise IndexError(f"corner id {cid} outside field of {tgf.n_corners} corners")
    adjacent = np.nonzero((tgf.corner_ids == cid).any(axis=1))[0]
    qualifying = adjacent[
        tgf.terrain_like()[adjacent]
        & tgf.has_plane[adjacent]
        & (np.abs(tgf.normals[adjacent, 2]) > _MIN_NORMAL_Z)
    ]
    if len(qualifying) == 0 or tgf.weights[qualifying].sum() <= 0:
        raise NoResolvedCornersError(
            f"corner {cid} has no trusted adjacent node with positive weight"
        )
    xy = tgf.corner_xy[cid]
    n = tgf.normals[qualifying]
    z = -(tgf.offsets[qualifying] + n[:, 0] * xy[0] + n[:, 1] * xy[1]) / n[:, 2]
    w = tgf.weights[qualifying]
    return float(w @ z / w.sum())


def resolve_corners(tgf: TriGridField) -> TriGridField:
    """Fill every corner elevation in place.

    Corners touched by at least one trusted plane get the weighted mean of
    plane heights; the rest copy the nearest resolved corner (lowest index
    on ties) and are flagged as fallbacks. A field with no resolvable
    corner at all has no terrain model and aborts.
    """
    q = np.nonzero(
        tgf.terrain_like()
        & tgf.has_plane
        & (np.abs(tgf.normals[:, 2]) > _MIN_NORMAL_Z)
    )[0]
    num = np.zeros(tgf.n_corners)
    den = np.zeros(tgf.n_corners)
    if len(q) > 0:
        cids = tgf.corner_ids[q].ravel()
        xy = tgf.corner_xy[cids]
        n = np.repeat(tgf.normals[q], 3, axis=0)
        off = np.repeat(tgf.offsets[q], 3)
        w = np.repeat(tgf.weights[q], 3)
        z = -(off + n[:, 0] * xy[:, 0] + n[:, 1] * xy[:, 1]) / n[:, 2]
        np.add.at(num, cids, w * z)
        np.add.at(den, cids, w)

    resolved = den > 0
    if not resolved.any():
        raise NoResolvedCornersError(
            "no corner is adjacent to a trusted node plane; the field holds no terrain"
        )
    tgf.corner_z = np.full(tgf.n_corners, np.nan)
    tgf.corner_z[resolved] = num[resolved] / den[resolved]
    tgf.corner_resolved = resolved.copy()
    tgf.corner_fallback = ~resolved

    missing = np.nonzero(~resolved)[0]
    if len(missing) > 0:
        src = np.nonzero(resolved)[0]
        tree = cKDTree(tgf.corner_xy[src])
        dist, nearest = tree.query(tgf.corner_xy[missing], k=1)
        # Lowest-index tie-break among equidistant resolved corners.
        balls = tree.query_ball_point(tgf.corner_xy[missing], dist * (1 + 1e-12) + 1e-12)
        pick = np.array([src[min(b)] if b else src[nearest[i]] for i, b in enumerate(balls)])
        tgf.corner_z[missing] = tgf.corner_z[pick]
    tgf.stats["corners_fallback"] = int(len(missing))
    return tgf


def plane_from_corners(corners: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Planes through corner triples of shape (..., 3, 3).

    Returns (means, normals, offsets): the mean is the corner centroid,
    the normal the (upward) unit cross product of the normalized corner
    edges, the offset follows from the mean.
    """
    c = np.asarray(corners, dtype=float)
    squeeze = c.ndim == 2
    c = c.reshape(-1, 3, 3)
    e2 = c[:, 1] - c[:, 0]
    e3 = c[:, 2] - c[:, 0]
    e2 /= np.linalg.norm(e2, axis=1, keepdims=True)
    e3 /= np.linalg.norm(e3, axis=1, keepdims=True)
    s = np.cross(e2, e3)
    lengths = np.linalg.norm(s, axis=1)
    # Grid corner xy positions are distinct and non-collinear for any
    # positive resolution, so the cross product cannot vanish.
    assert (lengths > 1e-12).all(), "degenerate corner triangle"
    s /= lengths[:, None]
    flip = s[:, 2] < 0
    s[flip] = -s[flip]
    m = c.mean(axis=1)
    d = -np.einsum("ij,ij->i", s, m)
    if squeeze:
        return m[0], s[0], float(d[0])
    return m, s, d


def refit_planes(tgf: TriGridField) -> TriGridField:
    """Refit every node plane exactly through its three resolved corners.

    Traversability weights and classes are preserved; only the planar
    models change.
    """
    if np.isnan(tgf.corner_z).any():
        raise NoResolvedCornersError("refit requires all corner elevations resolved")
    c = np.concatenate(
        [tgf.corner_xy[tgf.corner_ids], tgf.corner_z[tgf.corner_ids][..., None]],
        axis=2,
    )  # (M, 3, 3)
    m, s, d = plane_from_corners(c)
    tgf.means[:] = m
    tgf.normals[:] = s
    tgf.offsets[:] = d
    tgf.has_plane[:] = True
    return tgf
