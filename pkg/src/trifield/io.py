"""Dataset I/O: binary scans, semantic labels, poses, voxel downsampling,
partial-map accumulation and result files.

File conventions follow the common LiDAR benchmark layout: scans are
little-endian float32 quadruplets (x, y, z, intensity), label files one
little-endian uint32 per point with the semantic id in the low 16 bits,
and pose files ASCII rows of 12 floats (row-major 3x4). Numeric label ids
are never hardcoded; a per-dataset key-value config binds semantic names
to ids, and configs for the two supported public datasets ship with the
package.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CountMismatchError,
    MalformedFileError,
    PoseParseError,
    SequenceLengthMismatchError,
)
from .grid import PointCloud
from .labeling import SegmentationResult
from .metrics import GroundTruthClass

logger = logging.getLogger(__name__)

CONFIG_DIR_ENV = "TRIFIELD_CONFIG_DIR"
BUILTIN_DATASETS = ("semantickitti", "rellis3d")

RESULT_FORMATS = ("labeled-text", "labeled-binary")


# ---------------------------------------------------------------------------
# Dataset specs


@dataclass
class DatasetSpec:
    """Semantic-label metadata of one dataset."""

    name: str
    terrain_labels: frozenset
    ambiguous_labels: frozenset
    sensor_height: float
    label_id_map: dict = field(default_factory=dict)

    def __post_init__(self):
        known = set(self.label_id_map)
        if not self.ambiguous_labels <= known:
            raise ValueError(
                f"ambiguous labels {sorted(self.ambiguous_labels - known)} not in label map"
            )
        if not self.terrain_labels <= known:
            raise ValueError(
                f"terrain labels {sorted(self.terrain_labels - known)} not in label map"
            )
        if not self.sensor_height > 0:
            raise ValueError("sensor_height must be > 0")

    def class_lookup(self) -> np.ndarray:
        """uint8 table mapping 16-bit semantic ids to ground-truth classes."""
        table = np.full(1 << 16, GroundTruthClass.NON_TERRAIN, dtype=np.uint8)
        for name, label_id in self.label_id_map.items():
            if name in self.ambiguous_labels:
                table[label_id] = GroundTruthClass.AMBIGUOUS
            elif name in self.terrain_labels:
                table[label_id] = GroundTruthClass.TERRAIN
        return table

    def known_ids(self) -> np.ndarray:
        mask = np.zeros(1 << 16, dtype=bool)
        mask[list(self.label_id_map.values())] = True
        return mask


def parse_dataset_spec(text: str, source: str = "<string>") -> DatasetSpec:
    """Parse a plain key-value dataset spec.

    Recognized keys: ``name``, ``sensor_height``, ``terrain`` and
    ``ambiguous`` (comma-separated label names), and one ``label <name> =
    <id>`` line per semantic label.
    """
    name = ""
    sensor_height = None
    terrain: set = set()
    ambiguous: set = set()
    id_map: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "name":
            name = value
        elif key == "sensor_height":
            sensor_height = float(value)
        elif key == "terrain":
            terrain = {v.strip() for v in value.split(",") if v.strip()}
        elif key == "ambiguous":
            ambiguous = {v.strip() for v in value.split(",") if v.strip()}
        elif key.startswith("label "):
            id_map[key[len("label "):].strip()] = int(value)
        else:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
    if sensor_height is None:
        raise ValueError(f"{source}: missing sensor_height")
    return DatasetSpec(
        name=name,
        terrain_labels=frozenset(terrain),
        ambiguous_labels=frozenset(ambiguous),
        sensor_height=sensor_height,
        label_id_map=id_map,
    )


def load_dataset_spec(name_or_path) -> DatasetSpec:
    """Resolve a dataset spec from a path, the config-dir environment
    variable, or the shipped defaults."""
    p = Path(name_or_path)
    if p.is_file():
        return parse_dataset_spec(p.read_text(), str(p))
    config_dir = os.environ.get(CONFIG_DIR_ENV)
    if config_dir:
        candidate = Path(config_dir) / f"{name_or_path}.cfg"
        if candidate.is_file():
            return parse_dataset_spec(candidate.read_text(), str(candidate))
    if str(name_or_path) in BUILTIN_DATASETS:
        text = resources.files("trifield.data").joinpath(f"{name_or_path}.cfg").read_text()
        return parse_dataset_spec(text, f"builtin:{name_or_path}")
    raise FileNotFoundError(
        f"no dataset spec named {name_or_path!r} (not a file, not in "
        f"${CONFIG_DIR_ENV}, not one of {BUILTIN_DATASETS})"
    )


# ---------------------------------------------------------------------------
# Scans and labels


def read_scan_bin(path) -> PointCloud:
    """Read a binary scan of float32 (x, y, z, intensity) quadruplets.

    Intensity is dropped; non-finite points are removed and counted in the
    cloud's ``dropped`` field.
    """
    size = os.path.getsize(path)
    if size % 16 != 0:
        raise MalformedFileError(
            f"{path}: size {size} is not a multiple of 16 bytes (x,y,z,intensity float32)"
        )
    raw = np.fromfile(path, dtype="<f4").reshape(-1, 4)
    xyz = raw[:, :3].astype(np.float64)
    finite = np.isfinite(xyz).all(axis=1)
    dropped = int(len(xyz) - finite.sum())
    if dropped:
        logger.warning("%s: dropped %d non-finite points", path, dropped)
    return PointCloud(xyz[finite], dropped=dropped)


def read_labels(path, spec: DatasetSpec, expected_count: Optional[int] = None) -> np.ndarray:
    """Read per-point ground-truth classes from a binary label file.

    Semantic ids are the low 16 bits of each uint32 record and are mapped
    through the dataset spec into terrain / non-terrain / ambiguous.
    Unknown ids map to non-terrain with a warning.
    """
    size = os.path.getsize(path)
    if size % 4 != 0:
        raise MalformedFileError(f"{path}: size {size} is not a multiple of 4 bytes")
    raw = np.fromfile(path, dtype="<u4")
    if expected_count is not None and len(raw) != expected_count:
        raise CountMismatchError(
            f"{path}: {len(raw)} labels for {expected_count} points"
        )
    ids = (raw & 0xFFFF).astype(np.int64)
    unknown = ~spec.known_ids()[ids]
    if unknown.any():
        logger.warning(
            "%s: %d points with unknown semantic ids mapped to non-terrain",
            path,
            int(unknown.sum()),
        )
    return spec.class_lookup()[ids]


# ---------------------------------------------------------------------------
# Poses


@dataclass
class Pose:
    """Rigid transform: rotation (3x3) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        return np.asarray(xyz, dtype=float) @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(rotation=m[:3, :3].copy(), translation=m[:3, 3].copy())

    def is_rigid(self, tol: float = 1e-6) -> bool:
        r = self.rotation
        return bool(
            np.allclose(r @ r.T, np.eye(3), atol=10 * tol)
            and abs(np.linalg.det(r) - 1.0) <= tol
        )


def read_poses(path, calib: Optional[os.PathLike] = None) -> list[Pose]:
    """Read poses (12 floats per line, row-major 3x4).

    With a calibration file, each pose P is conjugated into the sensor
    frame as ``Tr^-1 @ P @ Tr`` using the file's ``Tr`` transform.
    """
    poses = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 12:
                raise PoseParseError(
                    f"{path}:{lineno}: expected 12 floats, got {len(parts)}",
                    line_number=lineno,
                )
            try:
                vals = np.array([float(v) for v in parts]).reshape(3, 4)
            except ValueError as err:
                raise PoseParseError(
                    f"{path}:{lineno}: {err}", line_number=lineno
                ) from err
            if not np.isfinite(vals).all():
                raise PoseParseError(
                    f"{path}:{lineno}: non-finite pose entry", line_number=lineno
                )
            poses.append(Pose(rotation=vals[:, :3], translation=vals[:, 3]))

    if calib is not None:
        tr = _read_calib_tr(calib)
        tr_inv = np.linalg.inv(tr)
        poses = [
            Pose.from_matrix(tr_inv @ p.as_matrix() @ tr) for p in poses
        ]
    for i, p in enumerate(poses):
        if not p.is_rigid(tol=1e-4):
            logger.warning("%s: pose %d is not numerically rigid", path, i)
    return poses


def _read_calib_tr(path) -> np.ndarray:
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            key = parts[0].rstrip(":")
            if key == "Tr":
                if len(parts) != 13:
                    raise PoseParseError(
                        f"{path}:{lineno}: Tr line needs 12 floats",
                        line_number=lineno,
                    )
                m = np.eye(4)
                m[:3] = np.array([float(v) for v in parts[1:]]).reshape(3, 4)
                return m
    raise PoseParseError(f"{path}: no 'Tr' line found")


# ---------------------------------------------------------------------------
# Voxel downsampling and partial maps


def voxel_downsample(cloud: PointCloud, res: float) -> PointCloud:
    """One representative per occupied voxel: centroid position, majority
    ground-truth class. Class ties prefer terrain (then the lower class
    value) so the reference stays recall-friendly."""
    if res <= 0:
        raise ValueError("voxel resolution must be > 0")
    xyz = cloud.xyz
    if len(xyz) == 0:
        return PointCloud(xyz.copy(), labels=None if cloud.labels is None else cloud.labels.copy())
    keys = np.floor(xyz / res).astype(np.int64)
    keys -= keys.min(axis=0)
    spans = keys.max(axis=0) + 1
    flat = (keys[:, 0] * spans[1] + keys[:, 1]) * spans[2] + keys[:, 2]
    uniq, inverse = np.unique(flat, return_inverse=True)
    n_vox = len(uniq)
    counts = np.bincount(inverse, minlength=n_vox)
    centroid = np.stack(
        [np.bincount(inverse, weights=xyz[:, k], minlength=n_vox) for k in range(3)],
        axis=1,
    ) / counts[:, None]

    labels = None
    if cloud.labels is not None:
        classes = np.asarray(cloud.labels, dtype=np.int64)
        per_class = np.zeros((n_vox, 3), dtype=np.int64)
        for cls in (GroundTruthClass.NON_TERRAIN, GroundTruthClass.TERRAIN, GroundTruthClass.AMBIGUOUS):
            per_class[:, cls] = np.bincount(
                inverse[classes == cls], minlength=n_vox
            )
        priority = np.array(
            [GroundTruthClass.TERRAIN, GroundTruthClass.NON_TERRAIN, GroundTruthClass.AMBIGUOUS]
        )
        winner = np.argmax(per_class[:, priority], axis=1)
        labels = priority[winner].astype(np.uint8)
    return PointCloud(centroid, labels=labels)


def accumulate_partial_map(
    scans: Sequence[PointCloud],
    classes: Sequence[np.ndarray],
    poses: Sequence[Pose],
    frames_per_map: int,
    res: float = 0.2,
) -> list[PointCloud]:
    """Build voxelized partial maps from consecutive pose-aligned scans.

    Scans are transformed into the map frame, concatenated over disjoint
    windows of ``frames_per_map`` frames (the trailing partial window is
    kept) and voxel-downsampled with majority-class labels.
    """
    if not (len(scans) == len(classes) == len(poses)):
        raise SequenceLengthMismatchError(
            f"scans ({len(scans)}), labels ({len(classes)}) and poses "
            f"({len(poses)}) must align"
        )
    if frames_per_map <= 0:
        raise ValueError("frames_per_map must be > 0")
    maps = []
    for start in range(0, len(scans), frames_per_map):
        window = range(start, min(start + frames_per_map, len(scans)))
        xyz = np.concatenate([poses[i].apply(scans[i].xyz) for i in window])
        cls = np.concatenate([np.asarray(classes[i], dtype=np.uint8) for i in window])
        if any(len(classes[i]) != len(scans[i]) for i in window):
            raise SequenceLengthMismatchError("per-scan label count mismatch")
        merged = PointCloud(xyz, labels=cls, frame_id=len(maps))
        maps.append(voxel_downsample(merged, res))
    return maps


# ---------------------------------------------------------------------------
# Results


def write_result(result: SegmentationResult, path, format: str = "labeled-text"):
    """Write per-point labels, aligned with the input order.

    labeled-text: one ``x y z label`` line per point (full float precision,
    so values round-trip); labeled-binary: one uint8 label per point.
    """
    if format not in RESULT_FORMATS:
        raise ValueError(f"format must be one of {RESULT_FORMATS}, got {format!r}")
    labels = np.asarray(result.labels, dtype=np.uint8)
    if format == "labeled-binary":
        labels.tofile(path)
        return
    if result.cloud is None:
        raise ValueError("labeled-text output needs the result's source cloud")
    xyz = result.cloud.xyz
    with open(path, "w") as fh:
        for (x, y, z), lab in zip(xyz, labels):
            fh.write(f"{x:.17g} {y:.17g} {z:.17g} {int(lab)}\n")


def read_result_labels(path, format: str = "labeled-binary") -> np.ndarray:
    if format == "labeled-binary":
        return np.fromfile(path, dtype=np.uint8)
    if format == "labeled-text":
        data = _read_labeled_text(path)
        return data[1]
    raise ValueError(f"format must be one of {RESULT_FORMATS}, got {format!r}")


def read_labeled_text(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a labeled-text result back as (xyz, labels)."""
    return _read_labeled_text(path)


def _read_labeled_text(path):
    if os.path.getsize(path) == 0:
        return np.empty((0, 3)), np.empty(0, dtype=np.uint8)
    raw = np.loadtxt(path, ndmin=2)
    if raw.size == 0:
        return np.empty((0, 3)), np.empty(0, dtype=np.uint8)
    return raw[:, :3], raw[:, 3].astype(np.uint8)


def write_scan_bin(xyz: np.ndarray, path):
    """Write points as float32 (x, y, z, 0) quadruplets."""
    xyz = np.asarray(xyz, dtype=np.float32)
    quad = np.zeros((len(xyz), 4), dtype="<f4")
    quad[:, :3] = xyz
    quad.tofile(path)


def write_class_file(classes: np.ndarray, path):
    """Write ground-truth classes (uint8) for an accumulated map."""
    np.asarray(classes, dtype=np.uint8).tofile(path)


def read_class_file(path) -> np.ndarray:
    return np.fromfile(path, dtype=np.uint8)
