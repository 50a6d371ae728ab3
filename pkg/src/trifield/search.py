"""Breadth-first traversable search over terrain-candidate nodes.

Expansion across an edge is gated by a local convexity/concavity test
between the two node planes: the normals must agree to within a bound that
relaxes with node distance, and each mean must lie close to the other
node's plane.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .config import TgfConfig
from .errors import MissingPlaneError, NoTerrainNodesError
from .grid import NodeClass, TgfNode, TriGridField


def lcc_planes(s_i, m_i, s_j, m_j, eps1: float, eps2: float) -> bool:
    """Local convexity/concavity predicate on two planar models."""
    d_ij = m_j - m_i
    d_norm = np.linalg.norm(d_ij)
    if abs(float(s_i @ s_j)) < 1.0 - np.sin(d_norm * eps2):
        return False
    bound = d_norm * np.sin(eps1)
    # d_ji = -d_ij, so both point-to-plane terms use the same magnitude.
    if abs(float(s_j @ d_ij)) > bound:
        return False
    if abs(float(s_i @ d_ij)) > bound:
        return False
    return True


def lcc(node_i: TgfNode, node_j: TgfNode, eps1: float, eps2: float) -> bool:
    """Predicate wrapper for node views; requires both planes fitted."""
    if node_i.plane is None or node_j.plane is None:
        raise MissingPlaneError(
            f"lcc needs fitted planes on nodes {node_i.id} and {node_j.id}"
        )
    return lcc_planes(
        node_i.plane.normal,
        node_i.plane.mean,
        node_j.plane.normal,
        node_j.plane.mean,
        eps1,
        eps2,
    )


def select_seeds(tgf: TriGridField, config: TgfConfig) -> np.ndarray:
    """Pick the start nodes of the traversable search.

    origin: the terrain node containing xy = (0, 0), else nearest terrain
    node by center distance. lowest: the terrain node with the lowest plane
    mean. points: nearest terrain node to each configured xy, deduplicated.
    """
    terrain = np.nonzero(tgf.node_class == NodeClass.TERRAIN)[0]
    if len(terrain) == 0:
        raise NoTerrainNodesError("no terrain nodes to seed the search from")

    policy = config.seed_policy
    if policy == "lowest":
        return np.array([terrain[np.argmin(tgf.means[terrain, 2])]])
    if policy == "origin":
        at_origin = tgf.locate(np.zeros((1, 2)))[0]
        if at_origin >= 0 and tgf.node_class[at_origin] == NodeClass.TERRAIN:
            return np.array([at_origin])
        return np.array([_nearest_terrain(tgf, terrain, np.zeros(2))])
    if policy == "points":
        seeds = []
        for xy in config.seed_points:
            sid = _nearest_terrain(tgf, terrain, np.asarray(xy, dtype=float))
            if sid not in seeds:
                seeds.append(sid)
        return np.array(seeds)
    raise ValueError(f"unknown seed policy {policy!r}")


def _nearest_terrain(tgf, terrain_ids, xy):
    d2 = np.sum((tgf.centers[terrain_ids] - xy) ** 2, axis=1)
    return int(terrain_ids[np.argmin(d2)])


def traverse(tgf: TriGridField, seeds, config: TgfConfig) -> TriGridField:
    """FIFO search from the seeds across edges passing the lcc test.

    Only nodes initially classified terrain participate. Reached nodes stay
    terrain; every other node, including unreached initial-terrain ones, is
    reclassified other.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    initial_terrain = tgf.node_class == NodeClass.TERRAIN

    # Evaluate the lcc gate once, vectorized over every edge joining two
    # initially-terrain nodes; the search then walks plain adjacency lists.
    m = tgf.n_nodes
    src = np.repeat(np.arange(m), tgf.neighbors.shape[1])
    dst = tgf.neighbors.ravel()
    keep = dst >= 0
    src, dst = src[keep], dst[keep]
    keep = initial_terrain[src] & initial_terrain[dst]
    src, dst = src[keep], dst[keep]
    d = tgf.means[dst] - tgf.means[src]
    d_norm = np.linalg.norm(d, axis=1)
    bound = d_norm * np.sin(config.eps1)
    sim = np.abs(np.einsum("ij,ij->i", tgf.normals[src], tgf.normals[dst]))
    passes = (
        (sim >= 1.0 - np.sin(d_norm * config.eps2))
        & (np.abs(np.einsum("ij,ij->i", tgf.normals[dst], d)) <= bound)
        & (np.abs(np.einsum("ij,ij->i", tgf.normals[src], d)) <= bound)
    )
    adjacency: list[list[int]] = [[] for _ in range(m)]
    for a, b in zip(src[passes].tolist(), dst[passes].tolist()):
        adjacency[a].append(b)

    reached = np.zeros(m, dtype=bool)
    queue = deque()
    for s in seeds:
        s = tgf.check_id(int(s))
        if initial_terrain[s] and not reached[s]:
            reached[s] = True
            queue.append(s)
    while queue:
        for j in adjacency[queue.popleft()]:
            if not reached[j]:
                reached[j] = True
                queue.append(j)

    tgf.node_class[initial_terrain & ~reached] = NodeClass.OTHER
    return tgf
