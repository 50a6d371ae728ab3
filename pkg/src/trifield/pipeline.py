"""End-to-end segmentation pipeline and the scikit-learn style estimator."""

from __future__ import annotations

import time
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import corners, plane, search
from .completion import complete
from .config import TgfConfig
from .errors import TriFieldError
from .grid import PointCloud, build_tgf
from .labeling import SegmentationResult, classify_against_field, label_points
from .validation import as_xyz_array


def segment(cloud: PointCloud, config: TgfConfig) -> SegmentationResult:
    """Run the full pipeline on one cloud.

    Stages: grid construction, per-node plane fit and classification,
    seeded traversable search, optional sparse-kernel completion, corner
    resolution with per-node refit, and final point labeling. Timings per
    stage are recorded in milliseconds; errors carry the stage name in
    their ``stage`` attribute.
    """
    config.validate()
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    field = _stage(timings, "build", build_tgf, cloud, config)
    _stage(timings, "fit", plane.fit_and_classify, field, cloud.xyz, config)

    def _search():
        seeds = search.select_seeds(field, config)
        return search.traverse(field, seeds, config)

    _stage(timings, "search", _search)
    if config.completion_enabled:
        _stage(timings, "completion", complete, field, config)
    else:
        field.stats["nodes_completed"] = 0

    def _refit():
        corners.resolve_corners(field)
        return corners.refit_planes(field)

    _stage(timings, "refit", _refit)
    result = _stage(
        timings, "label", label_points, field, cloud, config.eps3, config.two_sided_eps3
    )
    timings["total"] = (time.perf_counter() - t_start) * 1000.0
    result.timings_ms = timings
    result.stats["completion_enabled"] = config.completion_enabled
    return result


def _stage(timings, name, fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        out = fn(*args, **kwargs)
    except TriFieldError as err:
        err.stage = name
        raise
    timings[name] = (time.perf_counter() - t0) * 1000.0
    return out


class TerrainSegmenter(BaseEstimator):
    """Terrain segmentation as a fit/predict estimator.

    ``fit`` builds the terrain model from an (N, 3) point array and stores
    the in-sample labels; ``predict`` labels arbitrary points against the
    fitted field. Parameters mirror :class:`~trifield.config.TgfConfig`.

    Examples
    --------
    >>> seg = TerrainSegmenter.from_preset("single-scan")
    >>> labels = seg.fit_predict(points)
    >>> new_labels = seg.predict(more_points)
    """

    def __init__(
        self,
        resolution: float = 4.0,
        inclination_deg: float = 20.0,
        min_points: int = 10,
        eps1: float = 0.03,
        eps2: float = 0.1,
        eps3: float = 0.125,
        kernel_radius: Optional[float] = None,
        completion_min_mass: float = 0.0,
        completion_min_weight: float = 0.0,
        seed_policy: str = "origin",
        seed_points: Optional[Sequence] = None,
        completion_enabled: bool = True,
        two_sided_eps3: bool = False,
        point_gate_is_upper_bound: bool = False,
    ):
        self.resolution = resolution
        self.inclination_deg = inclination_deg
        self.min_points = min_points
        self.eps1 = eps1
        self.eps2 = eps2
        self.eps3 = eps3
        self.kernel_radius = kernel_radius
        self.completion_min_mass = completion_min_mass
        self.completion_min_weight = completion_min_weight
        self.seed_policy = seed_policy
        self.seed_points = seed_points
        self.completion_enabled = completion_enabled
        self.two_sided_eps3 = two_sided_eps3
        self.point_gate_is_upper_bound = point_gate_is_upper_bound

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "TerrainSegmenter":
        return cls.from_config(TgfConfig.preset(name).replace(**overrides))

    @classmethod
    def from_config(cls, config: TgfConfig) -> "TerrainSegmenter":
        return cls(**{f: getattr(config, f) for f in cls()._config_fields()})

    def _config_fields(self):
        return self.get_params().keys()

    def to_config(self) -> TgfConfig:
        return TgfConfig(**self.get_params())

    def fit(self, X, y=None) -> "TerrainSegmenter":
        """Build the terrain model from an (N, 3) array of xyz points."""
        xyz = as_xyz_array(X, allow_nonfinite=True)
        result = segment(PointCloud(xyz), self.to_config())
        self.result_ = result
        self.field_ = result.tgf
        self.labels_ = result.labels
        self.stats_ = result.stats
        self.n_points_ = len(xyz)
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).labels_

    def predict(self, X) -> np.ndarray:
        """Label arbitrary xyz points against the fitted terrain model.

        Uses the same rule as in-sample labeling: the one-sided plane test
        in trusted nodes, a symmetric band elsewhere; points outside the
        field are obstacle.
        """
        self._check_fitted()
        labels, _ = classify_against_field(
            self.field_, X, self.eps3, two_sided=self.two_sided_eps3
        )
        return labels

    def terrain_height(self, xy) -> np.ndarray:
        """Height of the fitted terrain model at xy positions (NaN outside
        the field or where a node plane is vertical)."""
        self._check_fitted()
        field = self.field_
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        ids = field.locate(xy)
        z = np.full(len(xy), np.nan)
        ok = ids >= 0
        ok[ok] &= field.has_plane[ids[ok]]
        n = field.normals[ids[ok]]
        usable = np.abs(n[:, 2]) > 1e-6
        rows = np.nonzero(ok)[0][usable]
        n = n[usable]
        z[rows] = (
            -(field.offsets[ids[rows]] + n[:, 0] * xy[rows, 0] + n[:, 1] * xy[rows, 1])
            / n[:, 2]
        )
        return z

    def _check_fitted(self):
        if not hasattr(self, "field_"):
            raise RuntimeError("TerrainSegmenter is not fitted yet; call fit() first")
