"""Pipeline configuration and the two shipped parameter presets."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConfigError

SEED_POLICIES = ("origin", "lowest", "points")


@dataclass
class TgfConfig:
    """Parameters controlling tri-grid field construction and segmentation.

    resolution
        Side length of a grid cell in meters; each cell is split into four
        triangular nodes.
    inclination_deg
        Maximum slope (degrees from horizontal) a node plane may have and
        still count as terrain.
    min_points
        Minimum number of points a node needs for its plane fit to be
        trusted.
    eps1, eps2
        Radian thresholds of the plane-to-plane traversability test: eps1
        bounds the mean-displacement/plane angles, eps2 scales the required
        normal similarity with node distance.
    eps3
        Point-to-plane distance threshold in meters used for the final
        per-point labels.
    kernel_radius
        Support radius of the sparse completion kernel in meters. ``None``
        defaults to ``3 * resolution``.
    completion_min_mass / completion_min_weight
        Gates a non-terrain node must pass to be reverted by completion:
        minimum summed kernel mass and minimum inferred traversability
        weight.
    seed_policy
        How the traversable search picks its start nodes: ``"origin"``
        (node containing xy = (0, 0), the sensor-origin convention for
        single scans), ``"lowest"`` (terrain node with the lowest plane
        mean, the map-wise default) or ``"points"`` (nearest terrain node
        to each xy in ``seed_points``).
    completion_enabled
        Turn sparse-kernel completion off to get the search-only ablation.
    two_sided_eps3
        Use |distance| <= eps3 for terrain/completed nodes instead of the
        default one-sided rule that accepts points arbitrarily far below
        the plane.
    point_gate_is_upper_bound
        Audit switch: treat ``min_points`` as an upper bound (count <=
        min_points) instead of the default lower bound. Off by default;
        see README notes on the classification rule.
    """

    resolution: float = 4.0
    inclination_deg: float = 20.0
    min_points: int = 10
    eps1: float = 0.03
    eps2: float = 0.1
    eps3: float = 0.125
    kernel_radius: Optional[float] = None
    completion_min_mass: float = 0.0
    completion_min_weight: float = 0.0
    seed_policy: str = "origin"
    seed_points: Optional[Sequence] = None
    completion_enabled: bool = True
    two_sided_eps3: bool = False
    point_gate_is_upper_bound: bool = False

    def validate(self) -> "TgfConfig":
        if not self.resolution > 0:
            raise ConfigError(f"resolution must be > 0, got {self.resolution}")
        if not 0 < self.inclination_deg < 90:
            raise ConfigError(
                f"inclination_deg must be in (0, 90), got {self.inclination_deg}"
            )
        if self.min_points < 3:
            raise ConfigError(f"min_points must be >= 3, got {self.min_points}")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ConfigError("eps1 and eps2 must be > 0")
        if not self.eps3 > 0:
            raise ConfigError(f"eps3 must be > 0, got {self.eps3}")
        if not self.effective_kernel_radius > 0:
            raise ConfigError("kernel_radius must be > 0")
        if self.completion_min_mass < 0:
            raise ConfigError("completion_min_mass must be >= 0")
        if not 0 <= self.completion_min_weight <= 1:
            raise ConfigError("completion_min_weight must be in [0, 1]")
        if self.seed_policy not in SEED_POLICIES:
            raise ConfigError(
                f"seed_policy must be one of {SEED_POLICIES}, got {self.seed_policy!r}"
            )
        if self.seed_policy == "points" and not self.seed_points:
            raise ConfigError("seed_policy 'points' requires seed_points")
        return self

    @property
    def effective_kernel_radius(self) -> float:
        return 3.0 * self.resolution if self.kernel_radius is None else self.kernel_radius

    def replace(self, **kwargs) -> "TgfConfig":
        return dataclasses.replace(self, **kwargs)

    @classmethod
    def preset(cls, name: str) -> "TgfConfig":
        try:
            return dataclasses.replace(PRESETS[name])
        except KeyError:
            raise ConfigError(
                f"unknown preset {name!r}; available: {sorted(PRESETS)}"
            ) from None

    @classmethod
    def from_file(cls, path, base: Optional["TgfConfig"] = None) -> "TgfConfig":
        """Read ``key = value`` overrides from a plain text file."""
        cfg = dataclasses.replace(base) if base is not None else cls()
        fields = {f.name: f for f in dataclasses.fields(cls)}
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in fields:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(cfg, key, _parse_value(key, value))
        return cfg


def _parse_value(key: str, value: str):
    if key == "seed_policy":
        return value
    if key == "seed_points":
        pts = []
        for pair in value.split(";"):
            pair = pair.strip()
            if pair:
                x, y = pair.split(",")
                pts.append((float(x), float(y)))
        return pts or None
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    if value.lower() in ("none", ""):
        return None
    if key == "min_points":
        return int(value)
    return float(value)


# Shipped presets: one tuned for single LiDAR scans, one for accumulated
# partial maps (coarser scans get the larger cell, dense maps the finer one).
PRESETS = {
    "single-scan": TgfConfig(
        resolution=4.0,
        inclination_deg=20.0,
        min_points=10,
        eps1=0.03,
        eps2=0.1,
        eps3=0.125,
        seed_policy="origin",
    ),
    "partial-map": TgfConfig(
        resolution=2.0,
        inclination_deg=20.0,
        min_points=10,
        eps1=0.03,
        eps2=0.1,
        eps3=0.3,
        seed_policy="lowest",
    ),
}
