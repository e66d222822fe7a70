"""Range-image clusterers.

Two connected-component labelers over the grid, differing in their merge
criterion:

* depth clustering looks at the 4 directly adjacent pixels and merges when
  the angle between the connecting segment and the farther beam is wide
  (equal depths give ~90 deg, a depth jump collapses it toward 0);
* adaptive Euclidean clustering looks at a full square window and merges
  when the 3D point distance falls below a depth-scaled threshold
  ``gamma * sin(alpha) * nearer_depth``, so the acceptance radius grows with
  range exactly as the beam spacing does.

Both run a single BFS flood fill with an explicit queue and assign labels in
row-major discovery order, so results are bit-for-bit deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidDepthError, InvalidInputError, ShapeMismatchError
from .ground import GroundMask
from .rangeimage import RangeImage, adjacent_beam_angles, window_beam_sin_table


@dataclass(frozen=True)
class DepthClusterParams:
    """Angle threshold in degrees; neighbors are the 4 adjacent pixels."""

    beta0_deg: float = 10.0

    def __post_init__(self):
        if not 0 < self.beta0_deg < 90:
            raise InvalidInputError("beta0_deg must be in (0, 90)")


@dataclass(frozen=True)
class EuclideanClusterParams:
    """Redundancy factor, window half-width, and optional fixed threshold.

    ``gamma`` stretches the depth-scaled acceptance distance and must be >= 1.
    Setting ``fixed_eps`` replaces the adaptive threshold with one constant
    distance (the classic fixed-threshold variant, kept for comparisons).
    """

    gamma: float = 1.2
    window: int = 2
    fixed_eps: float | None = None

    def __post_init__(self):
        if self.gamma < 1:
            raise InvalidInputError("gamma must be >= 1")
        if self.window < 1:
            raise InvalidInputError("window must be >= 1")
        if self.fixed_eps is not None and self.fixed_eps <= 0:
            raise InvalidInputError("fixed_eps must be positive when set")


@dataclass
class ClusterLabeling:
    """Per-pixel cluster ids for one clustering run.

    ``labels`` holds 0 for unlabeled/invalid/ground pixels and ids starting
    at 1. ``cluster_sizes[i]`` is the pixel count of cluster i (index 0 is
    always 0), so ``cluster_sizes.sum()`` equals the number of labeled pixels.
    """

    labels: np.ndarray
    cluster_sizes: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels.setflags(write=False)
        self.cluster_sizes.setflags(write=False)

    @property
    def num_clusters(self) -> int:
        """Clusters with at least one pixel (filtered-away ids don't count)."""
        return int(np.count_nonzero(self.cluster_sizes))

    @property
    def num_labeled(self) -> int:
        return int(self.cluster_sizes.sum())

    def size_of(self, cluster_id: int) -> int:
        return int(self.cluster_sizes[cluster_id])


def beta(depth_a: float, depth_b: float, alpha_deg: float) -> float:
    """Angle in degrees between the segment joining two returns and the farther beam.

    The farther of the two depths plays the adjacent side, so equal depths
    give ``90 - alpha/2`` and a large depth step drives the angle toward 0.
    A non-positive denominator lands on the (90, 180) branch.
    """
    if depth_a <= 0 or depth_b <= 0:
        raise InvalidDepthError(f"depths must be positive, got {depth_a}, {depth_b}")
    if alpha_deg <= 0:
        raise InvalidInputError("alpha must be positive")
    far = max(depth_a, depth_b)
    near = min(depth_a, depth_b)
    a = math.radians(alpha_deg)
    return math.degrees(math.atan2(near * math.sin(a), far - near * math.cos(a)))


def adaptive_threshold(depth_b: float, alpha_deg: float, gamma: float) -> float:
    """Distance acceptance threshold for a pixel pair: gamma * sin(alpha) * depth.

    ``depth_b`` is the smaller of the two pixel depths; the result scales
    linearly with it.
    """
    if depth_b <= 0:
        raise InvalidDepthError(f"depth must be positive, got {depth_b}")
    return gamma * math.sin(math.radians(alpha_deg)) * depth_b


def _excluded_mask(img: RangeImage, ground) -> np.ndarray:
    excluded = ~img.valid
    if ground is None:
        return excluded
    gmask = ground.mask if isinstance(ground, GroundMask) else np.asarray(ground, dtype=bool)
    if gmask.shape != img.depth.shape:
        raise ShapeMismatchError(f"ground mask {gmask.shape} vs image {img.depth.shape}")
    return excluded | gmask


def _sizes(labels: np.ndarray, num: int) -> np.ndarray:
    sizes = np.bincount(labels.ravel(), minlength=num + 1).astype(np.int64)
    sizes[0] = 0
    return sizes


def depth_cluster(img: RangeImage, ground, params: DepthClusterParams) -> ClusterLabeling:
    """Label valid non-ground pixels by the 4-adjacent beam-angle criterion."""
    excluded = _excluded_mask(img, ground)
    alpha_h, alpha_v = adjacent_beam_angles(img.sensor)
    labels, num = _kernels.depth_cluster_bfs(
        img.depth,
        excluded,
        np.sin(alpha_h),
        np.cos(alpha_h),
        np.sin(alpha_v),
        np.cos(alpha_v),
        math.radians(params.beta0_deg),
    )
    return ClusterLabeling(
        labels=labels,
        cluster_sizes=_sizes(labels, num),
        method="depth",
        params={"beta0_deg": params.beta0_deg},
    )


def euclidean_cluster(img: RangeImage, ground, params: EuclideanClusterParams) -> ClusterLabeling:
    """Label valid non-ground pixels by windowed distance-threshold merging."""
    if 2 * params.window + 1 > img.cols:
        raise InvalidInputError(
            f"window {params.window} spans more than the {img.cols} columns"
        )
    excluded = _excluded_mask(img, ground)
    if params.fixed_eps is not None:
        table = np.zeros((img.rows, 2 * params.window + 1, params.window + 1))
        fixed = float(params.fixed_eps)
        method = "euclid-fixed"
        recorded = {"fixed_eps": params.fixed_eps, "window": params.window}
    else:
        table = params.gamma * window_beam_sin_table(img.sensor, params.window)
        fixed = 0.0
        method = "euclid"
        recorded = {"gamma": params.gamma, "window": params.window}
    labels, num = _kernels.euclid_cluster_bfs(
        img.pts, excluded, params.window, table, fixed
    )
    return ClusterLabeling(
        labels=labels, cluster_sizes=_sizes(labels, num), method=method, params=recorded
    )


def filter_small_clusters(labeling: ClusterLabeling, min_size: int) -> ClusterLabeling:
    """Zero out clusters smaller than ``min_size``; surviving ids are unchanged."""
    if min_size <= 1:
        return labeling
    keep = labeling.cluster_sizes >= min_size
    keep[0] = False
    labels = np.where(keep[labeling.labels], labeling.labels, 0).astype(np.int32)
    sizes = np.where(keep, labeling.cluster_sizes, 0)
    return ClusterLabeling(
        labels=labels,
        cluster_sizes=sizes,
        method=labeling.method,
        params={**labeling.params, "min_size": min_size},
    )
