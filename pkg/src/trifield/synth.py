"""Procedural test scenes with analytic ground truth.

Scenes sample terrain points on a known surface z(x, y) plus Gaussian
noise, optionally delete returns inside unobserved regions (sunken areas
the sensor never saw) and add obstacle structures such as overhanging
slabs. The generator also returns per-point oracle labels and the surface
itself, so segmentation output can be scored against an exact reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field, asdict
from typing import Callable, Optional

import numpy as np

from .grid import PointCloud, PointLabel
from .labeling import SegmentationResult
from .metrics import AmbiguousPolicy, GroundTruthClass, confusion, metrics

SCENE_KINDS = ("flat", "bumpy", "pit", "overhang", "slope", "composite")


@dataclass
class SceneSpec:
    """Declarative description of one synthetic scene.

    ``extent`` is the side of the square sampled region (meters), centered
    on the origin; ``density`` is points per square meter. Kind-specific
    fields: ``amplitude``/``wavelength`` (bumpy), ``radius``/``depth``/
    ``observed``/``center`` (pit), ``height``/``side``/``center``
    (overhang), ``degrees`` (slope), ``children`` (composite features
    sharing the parent's sampling parameters).
    """

    kind: str = "flat"
    extent: float = 20.0
    density: float = 50.0
    noise_sigma: float = 0.02
    rng_seed: int = 0
    amplitude: float = 0.5
    wavelength: float = 8.0
    radius: float = 8.0
    depth: float = 2.0
    observed: bool = True
    profile: str = "cliff"  # pit walls: sharp drop, or a smooth cosine bowl
    center: tuple = (0.0, 0.0)
    height: float = 2.5
    side: float = 6.0
    degrees: float = 15.0
    children: list = dc_field(default_factory=list)

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be > 0")
        if self.profile not in ("cliff", "bowl"):
            raise ValueError(f"unknown pit profile {self.profile!r}")
        self.children = [
            c if isinstance(c, SceneSpec) else SceneSpec(**c) for c in self.children
        ]

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        return cls(**data)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    # -- geometry ---------------------------------------------------------
    def surface(self) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
        """The analytic terrain height z(x, y) of this scene."""
        parts = [self] + list(self.children) if self.kind == "composite" else [self]
        deltas = [p._own_delta() for p in parts]

        def z(x, y):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            total = np.zeros(np.broadcast(x, y).shape)
            for d in deltas:
                total += d(x, y)
            return total

        return z

    def _own_delta(self):
        if self.kind == "bumpy":
            a, w = self.amplitude, self.wavelength
            return lambda x, y: a * np.sin(2 * np.pi * x / w) * np.sin(2 * np.pi * y / w)
        if self.kind == "slope":
            slope = np.tan(np.radians(self.degrees))
            return lambda x, y: slope * x
        if self.kind == "pit":
            cx, cy = self.center
            r, depth = self.radius, self.depth
            if self.profile == "bowl":
                # Smooth cosine bowl: depth at the center, flush at the rim.
                def bowl(x, y):
                    rad = np.hypot(x - cx, y - cy)
                    return np.where(
                        rad < r, -0.5 * depth * (1.0 + np.cos(np.pi * rad / r)), 0.0
                    )

                return bowl
            return lambda x, y: np.where(np.hypot(x - cx, y - cy) < r, -depth, 0.0)
        return lambda x, y: np.zeros(np.broadcast(x, y).shape)

    def _features(self) -> list["SceneSpec"]:
        return list(self.children) if self.kind == "composite" else [self]


def generate(spec: SceneSpec) -> tuple[PointCloud, np.ndarray, Callable]:
    """Materialize a scene.

    Returns the cloud, oracle labels (1 terrain / 0 obstacle) and the
    analytic surface. Terrain points are sampled on the surface plus
    noise, so they are terrain by construction; obstacle points added for
    overhang structures sit far off the surface and are labeled obstacle.
    Unobserved pit footprints contain no returns at all.
    """
    rng = np.random.default_rng(spec.rng_seed)
    half = spec.extent / 2.0
    n = int(round(spec.density * spec.extent**2))
    xy = rng.uniform(-half, half, size=(n, 2))
    surface = spec.surface()
    z = surface(xy[:, 0], xy[:, 1])
    if spec.noise_sigma > 0:
        z = z + rng.normal(0.0, spec.noise_sigma, size=n)
    keep = np.ones(n, dtype=bool)
    for feat in spec._features():
        if feat.kind == "pit" and not feat.observed:
            cx, cy = feat.center
            keep &= np.hypot(xy[:, 0] - cx, xy[:, 1] - cy) >= feat.radius
    points = [np.column_stack([xy[keep], z[keep]])]
    labels = [np.ones(int(keep.sum()), dtype=np.uint8)]

    for feat in spec._features():
        if feat.kind == "overhang":
            slab_xyz = _slab_points(feat, surface, rng, spec.density, spec.noise_sigma)
            points.append(slab_xyz)
            labels.append(np.zeros(len(slab_xyz), dtype=np.uint8))

    cloud = PointCloud(np.concatenate(points, axis=0))
    oracle = np.concatenate(labels)
    return cloud, oracle, surface


def _slab_points(feat, surface, rng, density, noise_sigma):
    cx, cy = feat.center
    half = feat.side / 2.0
    n = max(1, int(round(density * feat.side**2)))
    xy = rng.uniform([cx - half, cy - half], [cx + half, cy + half], size=(n, 2))
    z = surface(xy[:, 0], xy[:, 1]) + feat.height
    if noise_sigma > 0:
        z = z + rng.normal(0.0, noise_sigma, size=n)
    return np.column_stack([xy, z])


def pit_floor_points(spec: SceneSpec, margin: float = 0.0, density: Optional[float] = None, rng_seed: int = 12345) -> np.ndarray:
    """Sample a fresh observation of a pit floor (no noise).

    Points are drawn inside the pit footprint shrunk by ``margin``; useful
    for checking what a completed terrain model predicts in a region the
    original cloud never observed.
    """
    pits = [f for f in spec._features() if f.kind == "pit"]
    if not pits:
        raise ValueError("scene has no pit feature")
    pit = pits[0]
    r = pit.radius - margin
    if r <= 0:
        raise ValueError("margin leaves no pit floor to sample")
    rng = np.random.default_rng(rng_seed)
    density = spec.density if density is None else density
    n = max(10, int(round(density * np.pi * r**2)))
    rad = r * np.sqrt(rng.uniform(0, 1, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    x = pit.center[0] + rad * np.cos(ang)
    y = pit.center[1] + rad * np.sin(ang)
    z = spec.surface()(x, y)
    return np.column_stack([x, y, z])


def oracle_score(result: SegmentationResult | np.ndarray, oracle_labels) -> tuple[float, float, float, float]:
    """Score predicted labels against oracle labels.

    Synthetic scenes have no ambiguous classes, so ambiguity is excluded
    by construction.
    """
    pred = result.labels if isinstance(result, SegmentationResult) else np.asarray(result)
    oracle_labels = np.asarray(oracle_labels)
    gt = np.where(
        oracle_labels == PointLabel.TERRAIN,
        GroundTruthClass.TERRAIN,
        GroundTruthClass.NON_TERRAIN,
    ).astype(np.uint8)
    c = confusion(pred, gt, policy=AmbiguousPolicy.exclude())
    return metrics(c)


def default_sweep_suite(n_scenes: int = 10, base_seed: int = 7) -> list[SceneSpec]:
    """The mixed-terrain suite used by the parameter-sensitivity harness.

    Each scene layers features whose failure modes the completion stage
    can heal: gentle wide bumps that every swept resolution can fit, a
    smooth bowl depression whose side slopes straddle the inclination
    sweep, and a small cliff-walled sunken patch that stays disconnected
    from the search at any setting. Sampling density is low enough that
    the finest grid resolution starves nodes of points.
    """
    suite = []
    for i in range(n_scenes):
        rng = np.random.default_rng(base_seed + i)
        amplitude = float(rng.uniform(0.12, 0.18))
        wavelength = float(rng.uniform(28.0, 34.0))
        angle = float(rng.uniform(0, 2 * np.pi))

        bowl_r = 10.0
        bowl_slope_deg = float(rng.uniform(12.0, 16.0))
        bowl_depth = float(np.tan(np.radians(bowl_slope_deg)) * 2 * bowl_r / np.pi)
        bowl_center = (10.8 * np.cos(angle), 10.8 * np.sin(angle))

        cliff_angle = angle + 2.6
        cliff_center = (14.0 * np.cos(cliff_angle), 14.0 * np.sin(cliff_angle))

        children = [
            SceneSpec(kind="bumpy", amplitude=amplitude, wavelength=wavelength),
            SceneSpec(
                kind="pit",
                profile="bowl",
                radius=bowl_r,
                depth=bowl_depth,
                observed=True,
                center=bowl_center,
            ),
            SceneSpec(
                kind="pit",
                profile="cliff",
                radius=float(rng.uniform(2.5, 3.5)),
                depth=float(rng.uniform(1.2, 1.8)),
                observed=True,
                center=cliff_center,
            ),
        ]
        if i % 3 == 0:
            oh_angle = angle + 4.4
            children.append(
                SceneSpec(
                    kind="overhang",
                    height=2.5,
                    side=4.0,
                    center=(15.0 * np.cos(oh_angle), 15.0 * np.sin(oh_angle)),
                )
            )
        suite.append(
            SceneSpec(
                kind="composite",
                extent=44.0,
                density=14.0,
                noise_sigma=0.02,
                rng_seed=100 + i,
                children=children,
            )
        )
    return suite


def sweep_base_config():
    """Base configuration for the sensitivity harness on the default suite.

    The single-scan preset with a relaxed plane-offset threshold: the
    suite's rolling terrain changes grade faster per node hop than a road
    scan, and the default bound would sever smooth slopes regardless of
    the swept parameter.
    """
    from .config import TgfConfig

    return TgfConfig.preset("single-scan").replace(eps1=0.13)


def load_scene_specs(path) -> list[SceneSpec]:
    """Read one spec or a list of specs from a JSON file."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    return [SceneSpec.from_dict(d) for d in data]
