"""Per-frame orchestration of the full adaptive denoising flow.

Stage order: project, ground removal, lenient depth clustering, adaptive
Euclidean clustering, skeleton extraction, degeneration scoring, a second
depth clustering at the degeneration-mapped threshold, and small-cluster
removal. The cleaned cloud keeps every surviving clustered point; ground
points are carried through flagged separately (downstream consumers use them
for z constraints), never deleted.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .clustering import (
    ClusterLabeling,
    DepthClusterParams,
    depth_cluster,
    euclidean_cluster,
    filter_small_clusters,
)
from .config import PipelineConfig
from .degeneration import (
    DegenerationReport,
    degeneration_degree,
    extract_normal_field,
    map_threshold,
)
from .errors import InsufficientFeaturesError
from .ground import GroundMask, classify_ground
from .rangeimage import PointCloud, RangeImage, project
from .skeleton import SkeletonMask, extract_skeleton


@dataclass
class FrameResult:
    """Everything one frame produced, including per-stage wall-clock timings."""

    frame_id: int
    cloud: PointCloud = field(repr=False)
    image: RangeImage = field(repr=False)
    ground: GroundMask = field(repr=False)
    first_depth: ClusterLabeling = field(repr=False)
    euclid: ClusterLabeling = field(repr=False)
    skeleton: SkeletonMask = field(repr=False)
    report: DegenerationReport
    final: ClusterLabeling = field(repr=False)
    cleaned_indices: np.ndarray = field(repr=False)
    ground_indices: np.ndarray = field(repr=False)
    removed_count: int = 0
    unprojected_count: int = 0
    timings: dict = field(default_factory=dict)

    @property
    def cleaned_cloud(self) -> PointCloud:
        return PointCloud(
            xyz=self.cloud.xyz[self.cleaned_indices],
            intensity=self.cloud.intensity[self.cleaned_indices],
        )


@dataclass
class FrameError:
    """Inline per-frame failure emitted by ``process_sequence``."""

    frame_id: int
    error: Exception


def process_frame(cloud: PointCloud, config: PipelineConfig, frame_id: int = 0) -> FrameResult:
    """Run the full flow on one cloud; raises on empty input or projection."""
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    img = project(cloud, config.sensor)
    timings["project"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ground = classify_ground(img, config.ground)
    timings["ground"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    first_depth = depth_cluster(img, ground, DepthClusterParams(config.first_pass_beta0))
    timings["depth_cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    euclid = euclidean_cluster(img, ground, config.euclid)
    timings["euclidean_cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    skel = extract_skeleton(euclid, first_depth, config.skeleton.n_e, config.skeleton.n_d)
    timings["skeleton"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    normal_field = extract_normal_field(img, skel, config.normals)
    try:
        report = degeneration_degree(normal_field, config.degen.min_features)
    except InsufficientFeaturesError:
        # Too sparse to analyze is itself evidence of degeneration: keep points.
        report = DegenerationReport(
            k=math.inf, mu=1.0, principal_direction=None, num_features=len(normal_field)
        )
    beta0 = map_threshold(report.mu, config.degen.beta0_min, config.degen.beta0_max)
    report.beta0_dynamic = beta0
    report.frame_id = frame_id
    timings["degeneration"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    second = depth_cluster(img, ground, DepthClusterParams(beta0))
    timings["depth_recluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    final = filter_small_clusters(second, config.skeleton.n_d)
    cleaned_mask = final.labels > 0
    cleaned_indices = img.point_index[cleaned_mask].astype(np.int64)
    ground_indices = img.point_index[ground.mask].astype(np.int64)
    timings["small_filter"] = time.perf_counter() - t0

    timings["total"] = time.perf_counter() - t_start
    removed = img.num_valid - ground.num_ground - int(cleaned_mask.sum())
    return FrameResult(
        frame_id=frame_id,
        cloud=cloud,
        image=img,
        ground=ground,
        first_depth=first_depth,
        euclid=euclid,
        skeleton=skel,
        report=report,
        final=final,
        cleaned_indices=cleaned_indices,
        ground_indices=ground_indices,
        removed_count=removed,
        unprojected_count=len(cloud) - img.num_valid,
        timings=timings,
    )


def process_sequence(
    frames: Iterable[PointCloud],
    config: PipelineConfig,
    start_frame: int = 0,
    workers: int = 1,
) -> Iterator[FrameResult | FrameError]:
    """Process a frame stream in order; per-frame errors come out inline.

    Frames are independent (no temporal state), so ``workers > 1`` runs a
    bounded thread pool while preserving output order.
    """
    def run(item):
        fid, cloud = item
        try:
            return process_frame(cloud, config, frame_id=fid)
        except Exception as exc:  # reported inline, stream continues
            return FrameError(frame_id=fid, error=exc)

    numbered = ((start_frame + i, cloud) for i, cloud in enumerate(frames))
    if workers <= 1:
        for item in numbered:
            yield run(item)
        return

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = []
        window = workers * 2
        for item in numbered:
            pending.append(pool.submit(run, item))
            while len(pending) >= window:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()
