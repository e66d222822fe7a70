"""Skeleton extraction: the structural core shared by both clusterings.

A pixel belongs to the skeleton when it survives small-cluster removal in
BOTH labelings: it sits on a large coherent surface (depth clustering) and on
a large object (Euclidean clustering). Everything downstream of degeneration
analysis runs on this mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterLabeling, filter_small_clusters
from .errors import ShapeMismatchError


@dataclass
class SkeletonMask:
    """Boolean grid over the range image; true = skeleton point."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask.setflags(write=False)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))


def extract_skeleton(
    euclid: ClusterLabeling, depth: ClusterLabeling, n_e: int, n_d: int
) -> SkeletonMask:
    """Intersect the two labelings after dropping small clusters.

    ``n_e`` guards the Euclidean side (large: keep big objects), ``n_d`` the
    depth side (small: keep surface structure). With both at 1 this is the
    plain intersection of the labelings' supports.
    """
    if euclid.labels.shape != depth.labels.shape:
        raise ShapeMismatchError(
            f"labelings differ in shape: {euclid.labels.shape} vs {depth.labels.shape}"
        )
    e = filter_small_clusters(euclid, n_e)
    d = filter_small_clusters(depth, n_d)
    return SkeletonMask(mask=(e.labels > 0) & (d.labels > 0))
