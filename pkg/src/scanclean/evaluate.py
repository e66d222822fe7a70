"""Quantitative evaluation: cluster-vs-box IoU and trajectory error metrics.

IoU is computed on point sets, not box volumes: a ground-truth box defines
the set of range-image points inside it, each cluster defines its own set,
and the box scores against its best-overlapping cluster. Trajectory error
follows the relative-pose convention: compare the estimated inter-frame
increment against the ground-truth increment at a fixed frame offset, then
aggregate with an RMSE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterLabeling
from .errors import EmptyInputError, InvalidInputError, LengthMismatchError
from .rangeimage import RangeImage

_ROT_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class LabeledBox:
    """Yaw-rotated box: center (m), full dimensions (m), yaw about z (rad)."""

    center: np.ndarray
    dimensions: np.ndarray
    yaw: float = 0.0
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(
            self, "dimensions", np.asarray(self.dimensions, dtype=np.float64).reshape(3)
        )
        if np.any(self.dimensions <= 0):
            raise InvalidInputError("box dimensions must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the box (boundaries inclusive)."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        c, s = math.cos(-self.yaw), math.sin(-self.yaw)
        rel = points - self.center
        local = np.empty_like(rel)
        local[:, 0] = c * rel[:, 0] - s * rel[:, 1]
        local[:, 1] = s * rel[:, 0] + c * rel[:, 1]
        local[:, 2] = rel[:, 2]
        half = self.dimensions / 2.0
        return (np.abs(local) <= half).all(axis=1)

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "dimensions": self.dimensions.tolist(),
            "yaw": self.yaw,
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledBox":
        return cls(
            center=np.asarray(d["center"]),
            dimensions=np.asarray(d["dimensions"]),
            yaw=float(d.get("yaw", 0.0)),
            tag=d.get("tag", ""),
        )


@dataclass
class Trajectory:
    """Ordered rigid poses as (N, 4, 4) homogeneous transforms."""

    poses: np.ndarray

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=np.float64)
        if self.poses.ndim != 3 or self.poses.shape[1:] != (4, 4):
            raise InvalidInputError(f"poses must be (N, 4, 4), got {self.poses.shape}")
        rot = self.poses[:, :3, :3]
        err = np.abs(rot @ rot.transpose(0, 2, 1) - np.eye(3)).max()
        if err > _ROT_ORTHO_TOL:
            raise InvalidInputError(f"rotations not orthonormal (max deviation {err:.2e})")

    def __len__(self) -> int:
        return len(self.poses)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.poses[i]

    @classmethod
    def from_kitti_rows(cls, rows: np.ndarray) -> "Trajectory":
        """Build from (N, 12) flattened 3x4 row-major transforms."""
        rows = np.asarray(rows, dtype=np.float64).reshape(-1, 12)
        poses = np.tile(np.eye(4), (len(rows), 1, 1))
        poses[:, :3, :] = rows.reshape(-1, 3, 4)
        return cls(poses)


@dataclass
class BoxIoU:
    tag: str
    iou: float
    best_cluster: int
    box_points: int


@dataclass
class IoUResult:
    per_box: list[BoxIoU] = field(default_factory=list)
    skipped: int = 0

    @property
    def mean_iou(self) -> float:
        if not self.per_box:
            return math.nan
        return float(np.mean([b.iou for b in self.per_box]))

    @property
    def fraction_above_half(self) -> float:
        if not self.per_box:
            return math.nan
        return float(np.mean([b.iou >= 0.5 for b in self.per_box]))


def cluster_box_iou(
    labeling: ClusterLabeling,
    img: RangeImage,
    boxes: list[LabeledBox],
    ground=None,
) -> IoUResult:
    """Best point-set IoU of each ground-truth box against any cluster.

    The point universe is the set of valid range-image pixels (optionally
    minus ground, which clusters can never contain). Boxes holding zero
    universe points are skipped and counted.
    """
    if labeling.labels.shape != img.depth.shape:
        raise InvalidInputError("labeling and image shapes differ")
    universe = img.valid
    if ground is not None:
        gmask = ground.mask if hasattr(ground, "mask") else np.asarray(ground, dtype=bool)
        universe = universe & ~gmask
    pts = np.stack([img.x[universe], img.y[universe], img.z[universe]], axis=1)
    labels_at = labeling.labels[universe]
    sizes = labeling.cluster_sizes

    result = IoUResult()
    for box in boxes:
        inside = box.contains(pts)
        n_box = int(inside.sum())
        if n_box == 0:
            result.skipped += 1
            continue
        overlap = np.bincount(labels_at[inside], minlength=len(sizes))
        overlap[0] = 0
        if overlap.sum() == 0:
            result.per_box.append(BoxIoU(box.tag, 0.0, 0, n_box))
            continue
        union = n_box + sizes[: len(overlap)] - overlap
        with np.errstate(divide="ignore", invalid="ignore"):
            iou = np.where(union > 0, overlap / union, 0.0)
        best = int(iou.argmax())
        result.per_box.append(BoxIoU(box.tag, float(iou[best]), best, n_box))
    return result


@dataclass
class RpeResult:
    """Per-frame relative pose errors at a fixed frame offset."""

    translational: np.ndarray
    rotational_rad: np.ndarray
    transforms: np.ndarray
    delta: int


def rpe(est: Trajectory, gt: Trajectory, delta: int = 1) -> RpeResult:
    """Relative pose error per frame.

    For each i, the error transform inverts the ground-truth increment over
    ``delta`` frames and applies the estimated increment; a perfect estimate
    gives the identity. Reports the translation magnitude and rotation angle
    of each error transform and keeps the transforms for further analysis.
    """
    if len(est) != len(gt):
        raise LengthMismatchError(f"trajectory lengths differ: {len(est)} vs {len(gt)}")
    if delta < 1:
        raise InvalidInputError("delta must be >= 1")
    if len(est) < delta + 1:
        raise InvalidInputError(f"need at least {delta + 1} poses, got {len(est)}")
    p = est.poses
    q = gt.poses
    n = len(p) - delta
    inc_p = np.linalg.inv(p[:n]) @ p[delta:]
    inc_q = np.linalg.inv(q[:n]) @ q[delta:]
    err = np.linalg.inv(inc_q) @ inc_p
    trans = np.linalg.norm(err[:, :3, 3], axis=1)
    tr = np.clip((np.trace(err[:, :3, :3], axis1=1, axis2=2) - 1.0) / 2.0, -1.0, 1.0)
    rot = np.arccos(tr)
    return RpeResult(translational=trans, rotational_rad=rot, transforms=err, delta=delta)


def rmse(errors) -> float:
    """Root mean square of a non-empty list of scalars."""
    errors = np.asarray(errors, dtype=np.float64).ravel()
    if len(errors) == 0:
        raise EmptyInputError("rmse of an empty list")
    return float(np.sqrt(np.mean(errors * errors)))
