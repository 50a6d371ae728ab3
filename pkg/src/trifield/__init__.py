"""trifield: map-wise traversable terrain modeling and segmentation of 3D
point clouds on a tri-grid field.

The pipeline embeds a cloud into a triangulated grid graph, fits per-node
planes by PCA, searches traversable terrain breadth-first under a local
convexity test, completes missing terrain models with a compact-support
sparse kernel, refits every node plane through traversability-weighted
corner elevations, and labels each point against its node's plane.
"""

from .completion import (
    KernelNeighborhood,
    complete,
    infer_normal,
    infer_weight,
    infer_z,
    kernel_neighborhood,
    normal_from_pair,
    sparse_kernel,
)
from .config import PRESETS, TgfConfig
from .corners import corner_elevation, plane_from_corners, refit_planes, resolve_corners
from .grid import (
    NodeClass,
    PlanarModel,
    PointCloud,
    PointLabel,
    TgfNode,
    TriGridField,
    build_tgf,
    node_neighbors,
    plane_height_at,
)
from .labeling import SegmentationResult, classify_against_field, label_points
from .metrics import AmbiguousPolicy, Confusion, GroundTruthClass, confusion, metrics
from .pipeline import TerrainSegmenter, segment
from .plane import classify_initial, fit_planar_model, traversability_weight
from .search import lcc, select_seeds, traverse
from .synth import SceneSpec, default_sweep_suite, generate, oracle_score, pit_floor_points
from .sweep import SweepRow, sweep

__version__ = "0.1.0"

__all__ = [
    "AmbiguousPolicy",
    "Confusion",
    "GroundTruthClass",
    "KernelNeighborhood",
    "NodeClass",
    "PlanarModel",
    "PointCloud",
    "PointLabel",
    "PRESETS",
    "SceneSpec",
    "SegmentationResult",
    "SweepRow",
    "TerrainSegmenter",
    "TgfConfig",
    "TgfNode",
    "TriGridField",
    "build_tgf",
    "classify_against_field",
    "classify_initial",
    "complete",
    "confusion",
    "corner_elevation",
    "default_sweep_suite",
    "fit_planar_model",
    "generate",
    "infer_normal",
    "infer_weight",
    "infer_z",
    "kernel_neighborhood",
    "label_points",
    "lcc",
    "metrics",
    "node_neighbors",
    "normal_from_pair",
    "oracle_score",
    "pit_floor_points",
    "plane_from_corners",
    "plane_height_at",
    "refit_planes",
    "resolve_corners",
    "segment",
    "select_seeds",
    "sparse_kernel",
    "sweep",
    "traversability_weight",
    "traverse",
]
