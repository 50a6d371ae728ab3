"""Confusion-matrix metrics with the ambiguous-label policy.

Some semantic classes (vegetation, bush) are terrain-like only near the
ground. The gated policy counts ambiguous points below a height threshold
derived from the sensor height as ground-truth terrain and the rest as
non-terrain; the exclude policy removes ambiguous points from the counts
entirely.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from .errors import LengthMismatchError
from .grid import PointLabel


class GroundTruthClass(IntEnum):
    NON_TERRAIN = 0
    TERRAIN = 1
    AMBIGUOUS = 2


@dataclass(frozen=True)
class AmbiguousPolicy:
    """How ambiguous ground-truth classes enter the confusion counts."""

    kind: str  # "gate" or "exclude"
    sensor_height: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gate", "exclude"):
            raise ValueError(f"unknown ambiguous policy {self.kind!r}")
        if self.kind == "gate" and not (self.sensor_height and self.sensor_height > 0):
            raise ValueError("gated policy requires a positive sensor height")

    @classmethod
    def include_with_z_gate(cls, sensor_height: float) -> "AmbiguousPolicy":
        return cls("gate", sensor_height)

    @classmethod
    def exclude(cls) -> "AmbiguousPolicy":
        return cls("exclude")


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred, gt, policy: AmbiguousPolicy, z=None) -> Confusion:
    """Count the confusion matrix of terrain predictions.

    ``pred`` holds point labels (terrain / obstacle), ``gt`` three-way
    ground-truth classes. Under the gated policy, ambiguous points whose z
    lies below ``-0.25 * sensor_height`` count as ground-truth terrain and
    the remaining ambiguous points as non-terrain; ``z`` is then required.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if len(pred) != len(gt):
        raise LengthMismatchError(f"pred has {len(pred)} entries, gt has {len(gt)}")
    ambiguous = gt == GroundTruthClass.AMBIGUOUS
    if policy.kind == "exclude":
        keep = ~ambiguous
        pred = pred[keep]
        gt_terrain = gt[keep] == GroundTruthClass.TERRAIN
    else:
        if z is None:
            raise ValueError("gated ambiguous policy requires per-point z values")
        z = np.asarray(z, dtype=float)
        if len(z) != len(gt):
            raise LengthMismatchError(f"z has {len(z)} entries, gt has {len(gt)}")
        gate = z < -0.25 * policy.sensor_height
        gt_terrain = (gt == GroundTruthClass.TERRAIN) | (ambiguous & gate)

    pred_terrain = pred == PointLabel.TERRAIN
    return Confusion(
        tp=int(np.count_nonzero(pred_terrain & gt_terrain)),
        fp=int(np.count_nonzero(pred_terrain & ~gt_terrain)),
        fn=int(np.count_nonzero(~pred_terrain & gt_terrain)),
        tn=int(np.count_nonzero(~pred_terrain & ~gt_terrain)),
    )


def metrics(c: Confusion) -> tuple[float, float, float, float]:
    """Precision, recall, F1 and accuracy, with 0/0 mapping to 0."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    accuracy = _ratio(c.tp + c.tn, c.total)
    return precision, recall, f1, accuracy


def _ratio(num, den) -> float:
    return float(num / den) if den else 0.0
