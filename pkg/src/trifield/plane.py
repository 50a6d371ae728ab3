"""Per-node PCA plane fitting, eigenvalue traversability weight, and the
initial terrain / other classification."""

from __future__ import annotations

import math

import numpy as np

from .config import TgfConfig
from .errors import DegenerateCovarianceError, TooFewPointsError
from .grid import NodeClass, PlanarModel, TriGridField

# Rank-2 test: the mid eigenvalue must carry a non-vanishing share of the
# leading one, otherwise the points are (numerically) collinear.
_RANK_REL_TOL = 1e-12


def fit_planar_model(points) -> tuple[PlanarModel, np.ndarray]:
    """Least-squares plane through >= 3 non-collinear points.

    Returns the planar model (unit normal with z >= 0, offset, centroid)
    and the descending eigenvalues of the population covariance.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    if len(pts) < 3:
        raise TooFewPointsError(f"plane fit needs >= 3 points, got {len(pts)}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    if evals[2] <= 0 or evals[1] < _RANK_REL_TOL * evals[2]:
        raise DegenerateCovarianceError(
            "point scatter is rank-deficient (collinear or coincident points)"
        )
    normal = evecs[:, 0]
    if normal[2] < 0:
        normal = -normal
    offset = -float(normal @ mean)
    eigs = evals[::-1].copy()
    np.clip(eigs, 0.0, None, out=eigs)
    return PlanarModel(normal=normal.copy(), offset=offset, mean=mean), eigs


def traversability_weight(eigenvalues) -> float:
    """Normalized planarity score in [0, 1] from descending eigenvalues.

    Combines low scattering (small lambda3 / lambda1) with high planarity
    ((lambda2 - lambda3) / lambda1); a zero leading eigenvalue scores 0.
    """
    l1, l2, l3 = (float(v) for v in eigenvalues)
    if l1 <= 0:
        return 0.0
    w = (1.0 - l3 / l1) * ((l2 - l3) / l1)
    return min(max(w, 0.0), 1.0)


def classify_initial(node, config: TgfConfig) -> NodeClass:
    """Terrain when the fitted normal is within the inclination threshold
    and the node holds enough points; everything else is other."""
    if node.plane is None:
        return NodeClass.OTHER
    count = len(node.point_indices)
    if config.point_gate_is_upper_bound:
        count_ok = count <= config.min_points
    else:
        count_ok = count >= config.min_points
    slope_ok = node.plane.normal[2] >= math.cos(math.radians(config.inclination_deg))
    return NodeClass.TERRAIN if (slope_ok and count_ok) else NodeClass.OTHER


def fit_and_classify(tgf: TriGridField, cloud_xyz: np.ndarray, config: TgfConfig) -> TriGridField:
    """Fit every populated node's plane and classify all nodes in place.

    Vectorized equivalent of calling :func:`fit_planar_model`,
    :func:`traversability_weight` and :func:`classify_initial` per node:
    per-node moments via bincount, then one batched symmetric eigensolve.
    """
    m = tgf.n_nodes
    nodes = tgf.point_nodes
    valid = nodes >= 0
    ids = nodes[valid]
    pts = cloud_xyz[valid]
    counts = np.bincount(ids, minlength=m)

    sums = np.stack(
        [np.bincount(ids, weights=pts[:, k], minlength=m) for k in range(3)], axis=1
    )
    with np.errstate(invalid="ignore"):
        means = sums / counts[:, None]
    centered = pts - means[ids]
    cov = np.zeros((m, 3, 3))
    for a in range(3):
        for b in range(a, 3):
            prod = np.bincount(ids, weights=centered[:, a] * centered[:, b], minlength=m)
            cov[:, a, b] = prod
            cov[:, b, a] = prod
    fit_mask = counts >= 3
    with np.errstate(invalid="ignore"):
        cov[fit_mask] /= counts[fit_mask, None, None]

    evals = np.zeros((m, 3))
    evecs = np.zeros((m, 3, 3))
    if fit_mask.any():
        evals_f, evecs_f = np.linalg.eigh(cov[fit_mask])
        evals[fit_mask] = evals_f
        evecs[fit_mask] = evecs_f

    rank_ok = fit_mask & (evals[:, 2] > 0) & (
        evals[:, 1] >= _RANK_REL_TOL * evals[:, 2]
    )
    normals = evecs[:, :, 0]
    flip = normals[:, 2] < 0
    normals[flip] = -normals[flip]

    eigs_desc = np.clip(evals[:, ::-1], 0.0, None)
    tgf.has_plane[:] = rank_ok
    tgf.means[rank_ok] = means[rank_ok]
    tgf.normals[rank_ok] = normals[rank_ok]
    tgf.offsets[rank_ok] = -np.einsum("ij,ij->i", normals[rank_ok], means[rank_ok])
    tgf.eigenvalues[rank_ok] = eigs_desc[rank_ok]

    l1 = eigs_desc[:, 0]
    safe = l1 > 0
    w = np.zeros(m)
    w[safe] = (1.0 - eigs_desc[safe, 2] / l1[safe]) * (
        (eigs_desc[safe, 1] - eigs_desc[safe, 2]) / l1[safe]
    )
    np.clip(w, 0.0, 1.0, out=w)
    w[~rank_ok] = 0.0
    tgf.weights[:] = w

    if config.point_gate_is_upper_bound:
        count_ok = counts <= config.min_points
    else:
        count_ok = counts >= config.min_points
    slope_ok = rank_ok & (normals[:, 2] >= math.cos(math.radians(config.inclination_deg)))
    terrain = rank_ok & count_ok & slope_ok
    tgf.node_class[:] = np.where(terrain, NodeClass.TERRAIN, NodeClass.OTHER).astype(np.int8)
    return tgf
