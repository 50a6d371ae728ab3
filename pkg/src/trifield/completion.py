"""Sparse-kernel terrain completion.

Non-terrain nodes inherit a predicted planar model from the terrain nodes
inside a compact-support kernel around them: elevation, normal and
traversability weight are kernel-weighted averages, and nodes passing the
mass / weight gates are reverted to completed terrain. Contributors are
frozen before the pass, so completed nodes never feed other predictions
within the same run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .config import TgfConfig
from .errors import (
    EmptyNeighborhoodError,
    NonpositiveRadiusError,
    VerticalDisplacementError,
)
from .grid import NodeClass, TriGridField

logger = logging.getLogger(__name__)


def sparse_kernel(d, radius: float):
    """Compact-support influence kernel on distance ``d``.

    Equals 1 at d = 0, decays smoothly, and is exactly 0 from d = radius
    on. Accepts scalars or arrays; output is clipped to [0, 1] to absorb
    rounding at the support boundary.
    """
    if radius <= 0:
        raise NonpositiveRadiusError(f"kernel radius must be > 0, got {radius}")
    d = np.asarray(d, dtype=np.float64)
    t = d / radius
    angle = 2.0 * np.pi * t
    value = (2.0 + np.cos(angle)) * (1.0 - t) / 3.0 + np.sin(angle) / (2.0 * np.pi)
    value = np.where(t < 1.0, value, 0.0)
    value = np.clip(value, 0.0, 1.0)
    return float(value) if value.ndim == 0 else value


@dataclass
class KernelNeighborhood:
    """Terrain contributors of one target node: ids and kernel values for
    distances strictly inside the support radius (kernel > 0)."""

    target_id: int
    contributor_ids: np.ndarray
    kernel: np.ndarray

    def __len__(self) -> int:
        return len(self.contributor_ids)


def kernel_neighborhood(tgf: TriGridField, target_id: int, radius: float) -> KernelNeighborhood:
    """Collect terrain contributors around a target node's center.

    Distance is measured in xy between each contributor's mean point and
    the target center.
    """
    i = tgf.check_id(target_id)
    contributors = np.nonzero((tgf.node_class == NodeClass.TERRAIN) & tgf.has_plane)[0]
    if len(contributors) == 0:
        return KernelNeighborhood(i, np.empty(0, dtype=np.int64), np.empty(0))
    d = np.hypot(
        tgf.means[contributors, 0] - tgf.centers[i, 0],
        tgf.means[contributors, 1] - tgf.centers[i, 1],
    )
    k = sparse_kernel(d, radius)
    keep = k > 0
    return KernelNeighborhood(i, contributors[keep], np.asarray(k[keep]))


def infer_z(tgf: TriGridField, hood: KernelNeighborhood) -> float:
    """Kernel-weighted mean of contributor elevations."""
    _require_nonempty(hood)
    z = tgf.means[hood.contributor_ids, 2]
    return float(hood.kernel @ z / hood.kernel.sum())


def normal_from_pair(m_i, m_j) -> np.ndarray:
    """Unit normal a plane through ``m_j`` would need to be orthogonal to
    the displacement ``m_j - m_i``; undefined for vertical displacements."""
    delta = np.asarray(m_j, dtype=float) - np.asarray(m_i, dtype=float)
    horiz = np.hypot(delta[0], delta[1])
    if horiz <= 0:
        raise VerticalDisplacementError(
            "displacement between means has no horizontal component"
        )
    norm = np.linalg.norm(delta)
    return (
        np.array([-delta[0] * delta[2] / horiz, -delta[1] * delta[2] / horiz, horiz])
        / norm
    )


def infer_normal(tgf: TriGridField, hood: KernelNeighborhood, target_mean) -> np.ndarray:
    """Kernel-weighted average of pairwise normals, renormalized to unit
    length with z >= 0. Vertical-displacement contributors are skipped."""
    _require_nonempty(hood)
    target_mean = np.asarray(target_mean, dtype=float)
    delta = target_mean - tgf.means[hood.contributor_ids]
    horiz = np.hypot(delta[:, 0], delta[:, 1])
    ok = horiz > 0
    if not ok.any():
        raise EmptyNeighborhoodError(
            "all contributors are vertically displaced from the target"
        )
    delta = delta[ok]
    horiz = horiz[ok]
    norms = np.linalg.norm(delta, axis=1)
    pair_normals = np.stack(
        [
            -delta[:, 0] * delta[:, 2] / horiz,
            -delta[:, 1] * delta[:, 2] / horiz,
            horiz,
        ],
        axis=1,
    ) / norms[:, None]
    weighted = hood.kernel[ok] @ pair_normals / hood.kernel[ok].sum()
    length = np.linalg.norm(weighted)
    if length < 1e-12:
        logger.warning(
            "pairwise normals cancelled for node %d; falling back to vertical",
            hood.target_id,
        )
        return np.array([0.0, 0.0, 1.0])
    s = weighted / length
    if s[2] < 0:
        s = -s
    return s


def infer_weight(tgf: TriGridField, hood: KernelNeighborhood, target_normal) -> float:
    """Kernel-weighted contributor weights, discounted by normal
    similarity to the inferred target normal; clamped to [0, 1]."""
    _require_nonempty(hood)
    s = np.asarray(target_normal, dtype=float)
    sims = tgf.normals[hood.contributor_ids] @ s
    w = hood.kernel @ (tgf.weights[hood.contributor_ids] * sims) / hood.kernel.sum()
    return min(max(float(w), 0.0), 1.0)


def _require_nonempty(hood: KernelNeighborhood):
    if len(hood) == 0 or hood.kernel.sum() <= 0:
        raise EmptyNeighborhoodError(
            f"node {hood.target_id} has no terrain contributors in kernel range"
        )


def complete(tgf: TriGridField, config: TgfConfig) -> TriGridField:
    """Revert qualifying other-class nodes to completed terrain in place.

    Predictions use only the pre-pass terrain nodes; evaluation order per
    node is elevation, then normal (which needs the predicted mean), then
    offset, then weight. Nodes whose kernel mass or inferred weight fall
    short of the configured gates are left untouched.
    """
    radius = config.effective_kernel_radius
    contributors = np.nonzero((tgf.node_class == NodeClass.TERRAIN) & tgf.has_plane)[0]
    targets = np.nonzero(tgf.node_class == NodeClass.OTHER)[0]
    tgf.stats["nodes_completed"] = 0
    if len(contributors) == 0 or len(targets) == 0:
        return tgf

    tree = cKDTree(tgf.means[contributors, :2])
    hoods = tree.query_ball_point(tgf.centers[targets], r=radius)
    pair_target = []
    pair_contrib = []
    for row, hood in enumerate(hoods):
        if hood:
            pair_target.append(np.full(len(hood), row))
            pair_contrib.append(np.asarray(hood))
    if not pair_target:
        return tgf
    pair_target = np.concatenate(pair_target)          # index into targets
    pair_contrib = np.concatenate(pair_contrib)        # index into contributors

    c_mean = tgf.means[contributors[pair_contrib]]
    t_center = tgf.centers[targets[pair_target]]
    d = np.hypot(c_mean[:, 0] - t_center[:, 0], c_mean[:, 1] - t_center[:, 1])
    k = sparse_kernel(d, radius)
    keep = k > 0
    pair_target, pair_contrib, k = pair_target[keep], pair_contrib[keep], k[keep]
    c_mean, t_center = c_mean[keep], t_center[keep]

    n_t = len(targets)
    mass = np.bincount(pair_target, weights=k, minlength=n_t)
    has_any = mass > 0
    passes_mass = has_any & (mass >= config.completion_min_mass)

    z_num = np.bincount(pair_target, weights=k * c_mean[:, 2], minlength=n_t)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = z_num / mass

    # Pairwise normals toward each target's predicted mean; vertical
    # displacements drop out of the average.
    delta = np.column_stack(
        [
            t_center[:, 0] - c_mean[:, 0],
            t_center[:, 1] - c_mean[:, 1],
            z[pair_target] - c_mean[:, 2],
        ]
    )
    horiz = np.hypot(delta[:, 0], delta[:, 1])
    ok = horiz > 0
    norms = np.linalg.norm(delta, axis=1)
    pair_n = np.zeros((len(delta), 3))
    pair_n[ok, 0] = -delta[ok, 0] * delta[ok, 2] / horiz[ok] / norms[ok]
    pair_n[ok, 1] = -delta[ok, 1] * delta[ok, 2] / horiz[ok] / norms[ok]
    pair_n[ok, 2] = horiz[ok] / norms[ok]
    k_n = np.where(ok, k, 0.0)
    n_mass = np.bincount(pair_target, weights=k_n, minlength=n_t)
    s = np.zeros((n_t, 3))
    for axis in range(3):
        s[:, axis] = np.bincount(pair_target, weights=k_n * pair_n[:, axis], minlength=n_t)
    with np.errstate(invalid="ignore", divide="ignore"):
        s /= n_mass[:, None]
    lengths = np.linalg.norm(s, axis=1)
    degenerate = passes_mass & ((n_mass <= 0) | (lengths < 1e-12))
    if degenerate.any():
        logger.warning(
            "pairwise normals cancelled for %d nodes; falling back to vertical",
            int(degenerate.sum()),
        )
        s[degenerate] = (0.0, 0.0, 1.0)
        lengths[degenerate] = 1.0
    safe = lengths > 0
    s[safe] /= lengths[safe, None]
    flip = s[:, 2] < 0
    s[flip] = -s[flip]

    sims = np.einsum("ij,ij->i", tgf.normals[contributors[pair_contrib]], s[pair_target])
    w_num = np.bincount(
        pair_target,
        weights=k * tgf.weights[contributors[pair_contrib]] * sims,
        minlength=n_t,
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.clip(w_num / mass, 0.0, 1.0)

    revert = passes_mass & (w >= config.completion_min_weight)
    ids = targets[revert]
    means = np.column_stack([tgf.centers[targets, 0], tgf.centers[targets, 1], z])
    tgf.means[ids] = means[revert]
    tgf.normals[ids] = s[revert]
    tgf.offsets[ids] = -np.einsum("ij,ij->i", s[revert], means[revert])
    tgf.weights[ids] = w[revert]
    tgf.has_plane[ids] = True
    tgf.node_class[ids] = NodeClass.COMPLETED
    tgf.stats["nodes_completed"] = int(revert.sum())
    return tgf
