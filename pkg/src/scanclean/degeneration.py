"""Normal-vector field extraction and scene degeneration scoring.

A weighted plane normal is fitted (by PCA of a range-image neighborhood) at a
random sample of skeleton pixels. The 2D projections of those normals are
reduced to a single anisotropy ratio k: mass along the dominant axis over
mass across it. k = 1 means constraints in all directions (cluttered scene);
k -> inf means all normals agree (corridor, highway). The degeneration degree
mu = 1 - 1/k maps that onto [0, 1], and mu picks the re-clustering threshold
linearly between a lenient floor and a strict ceiling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import (
    DegenerateNeighborhoodError,
    InsufficientFeaturesError,
    InvalidInputError,
    TooFewPointsError,
)
from .rangeimage import PixelCoord, RangeImage
from .skeleton import SkeletonMask

_RANK_TOL = 1e-12
_EVEC_TOL = 1e-24


@dataclass(frozen=True)
class NormalFieldParams:
    """Sampling and neighborhood-gating knobs for normal extraction."""

    sample_fraction: float = 0.10
    window: int = 2
    depth_gate: float = 0.5
    min_neighbors: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise InvalidInputError("sample_fraction must be in (0, 1]")
        if self.window < 1:
            raise InvalidInputError("window must be >= 1")
        if self.depth_gate <= 0:
            raise InvalidInputError("depth_gate must be positive")
        if self.min_neighbors < 3:
            raise InvalidInputError("min_neighbors must be >= 3 (plane fit)")


class NormalFeature(NamedTuple):
    unit_normal: np.ndarray
    weight: float
    source_pixel: PixelCoord
    neighbor_count: int
    depth: float


@dataclass
class NormalFeatureField:
    """Column-wise storage for a batch of weighted normals."""

    unit_normals: np.ndarray
    weights: np.ndarray
    pixels: np.ndarray
    neighbor_counts: np.ndarray
    depths: np.ndarray

    def __len__(self) -> int:
        return len(self.weights)

    def __getitem__(self, i: int) -> NormalFeature:
        return NormalFeature(
            unit_normal=self.unit_normals[i],
            weight=float(self.weights[i]),
            source_pixel=PixelCoord(int(self.pixels[i, 0]), int(self.pixels[i, 1])),
            neighbor_count=int(self.neighbor_counts[i]),
            depth=float(self.depths[i]),
        )

    @classmethod
    def empty(cls) -> "NormalFeatureField":
        return cls(
            unit_normals=np.zeros((0, 3)),
            weights=np.zeros(0),
            pixels=np.zeros((0, 2), dtype=np.int64),
            neighbor_counts=np.zeros(0, dtype=np.int64),
            depths=np.zeros(0),
        )


@dataclass
class DegenerationReport:
    """Per-frame degeneration summary.

    ``mu == 1 - 1/k`` always; ``k`` may be ``math.inf`` (perfectly degenerate),
    in which case it serializes as null. ``beta0_dynamic`` and ``frame_id``
    are filled by the pipeline.
    """

    k: float
    mu: float
    principal_direction: np.ndarray | None
    num_features: int
    beta0_dynamic: float | None = None
    frame_id: int | None = None

    def to_dict(self) -> dict:
        return {
            "k": None if not math.isfinite(self.k) else self.k,
            "mu": self.mu,
            "principal_direction": (
                None if self.principal_direction is None else [float(v) for v in self.principal_direction]
            ),
            "beta0_dynamic": self.beta0_dynamic,
            "num_features": self.num_features,
            "frame_id": self.frame_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegenerationReport":
        direction = d.get("principal_direction")
        return cls(
            k=math.inf if d.get("k") is None else float(d["k"]),
            mu=float(d["mu"]),
            principal_direction=None if direction is None else np.asarray(direction, dtype=np.float64),
            num_features=int(d["num_features"]),
            beta0_dynamic=d.get("beta0_dynamic"),
            frame_id=d.get("frame_id"),
        )


def _smallest_eigenvector_batch(covs: np.ndarray):
    """Closed-form smallest eigenpair of symmetric 3x3 matrices.

    Returns (vectors, lam_min, lam_mid, lam_max, degenerate). ``degenerate``
    flags matrices with rank < 2 or an ill-defined smallest eigenvector, for
    which the vector row is unreliable. Matrices are normalized by their
    largest entry first, so thresholds are scale-free.
    """
    covs = np.asarray(covs, dtype=np.float64).reshape(-1, 3, 3)
    scale = np.abs(covs).max(axis=(1, 2))
    safe_scale = np.where(scale > 0, scale, 1.0)
    a = covs / safe_scale[:, None, None]

    a00 = a[:, 0, 0]
    a01 = a[:, 0, 1]
    a02 = a[:, 0, 2]
    a11 = a[:, 1, 1]
    a12 = a[:, 1, 2]
    a22 = a[:, 2, 2]
    q = (a00 + a11 + a22) / 3.0
    b00 = a00 - q
    b11 = a11 - q
    b22 = a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * (a01 * a01 + a02 * a02 + a12 * a12)
    p = np.sqrt(np.maximum(p2 / 6.0, 0.0))
    safe_p = np.where(p > 0, p, 1.0)
    c00 = b00 / safe_p
    c11 = b11 / safe_p
    c22 = b22 / safe_p
    c01 = a01 / safe_p
    c02 = a02 / safe_p
    c12 = a12 / safe_p
    half_det = (
        c00 * (c11 * c22 - c12 * c12)
        - c01 * (c01 * c22 - c12 * c02)
        + c02 * (c01 * c12 - c11 * c02)
    ) / 2.0
    phi = np.arccos(np.clip(half_det, -1.0, 1.0)) / 3.0
    lam_max = q + 2.0 * p * np.cos(phi)
    lam_min = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    lam_mid = 3.0 * q - lam_max - lam_min

    # Rows of (A - lam_min I); the eigenvector is orthogonal to all of them,
    # so the largest pairwise cross product is the most stable choice.
    r0 = np.stack([a00 - lam_min, a01, a02], axis=1)
    r1 = np.stack([a01, a11 - lam_min, a12], axis=1)
    r2 = np.stack([a02, a12, a22 - lam_min], axis=1)
    c_a = np.cross(r0, r1)
    c_b = np.cross(r0, r2)
    c_c = np.cross(r1, r2)
    norms = np.stack(
        [(c_a * c_a).sum(1), (c_b * c_b).sum(1), (c_c * c_c).sum(1)], axis=1
    )
    best = norms.argmax(axis=1)
    vecs = np.where(
        (best == 0)[:, None], c_a, np.where((best == 1)[:, None], c_b, c_c)
    )
    best_norm = norms.max(axis=1)
    degenerate = (scale <= 0) | (lam_mid < _RANK_TOL) | (best_norm < _EVEC_TOL)
    safe_norm = np.where(best_norm > 0, np.sqrt(best_norm), 1.0)
    vecs = vecs / safe_norm[:, None]
    lam = safe_scale
    return vecs, lam_min * lam, lam_mid * lam, lam_max * lam, degenerate


def neighborhood_set(
    img: RangeImage, skeleton: SkeletonMask, p: PixelCoord, params: NormalFieldParams
) -> np.ndarray:
    """3D points of skeleton pixels in the window around ``p`` passing the depth gate.

    Includes ``p`` itself (its gate is trivially zero). Columns wrap; rows clip.
    """
    if 2 * params.window + 1 > img.cols:
        raise InvalidInputError(f"window {params.window} spans more than the {img.cols} columns")
    if not skeleton.mask[p.row, p.col]:
        raise InvalidInputError(f"{p} is not a skeleton pixel")
    pts = []
    d0 = img.depth[p.row, p.col]
    for dr in range(-params.window, params.window + 1):
        r = p.row + dr
        if r < 0 or r >= img.rows:
            continue
        for dc in range(-params.window, params.window + 1):
            c = (p.col + dc) % img.cols
            if not skeleton.mask[r, c]:
                continue
            if abs(img.depth[r, c] - d0) < params.depth_gate:
                pts.append((img.x[r, c], img.y[r, c], img.z[r, c]))
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


def pca_normal(points: np.ndarray, min_points: int = 3) -> np.ndarray:
    """Unit plane normal of a neighborhood, oriented toward the sensor origin.

    Centers the points, forms the population covariance, and returns the
    eigenvector of the smallest eigenvalue. Raises TooFewPointsError below
    ``min_points`` and DegenerateNeighborhoodError when the covariance has
    rank < 2 (no plane is defined).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) < max(min_points, 3):
        raise TooFewPointsError(f"need at least {max(min_points, 3)} points, got {len(points)}")
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = (centered.T @ centered) / len(points)
    vecs, _, _, _, degenerate = _smallest_eigenvector_batch(cov[None])
    if degenerate[0]:
        raise DegenerateNeighborhoodError("neighborhood covariance has rank < 2")
    normal = vecs[0]
    if normal @ centroid > 0:
        normal = -normal
    return normal


def normal_weight(depth: float, neighbor_count: int, max_range: float) -> float:
    """Confidence of a normal: ln((max_range - depth) * count + 1).

    Nearer, denser neighborhoods weigh more; zero neighbors or depth at the
    range limit give zero. Depths beyond ``max_range`` clamp to zero weight.
    """
    if neighbor_count < 0:
        raise InvalidInputError("neighbor_count must be >= 0")
    if depth <= 0:
        raise InvalidInputError("depth must be positive")
    margin = max(max_range - depth, 0.0)
    return math.log(margin * neighbor_count + 1.0)


def extract_normal_field(
    img: RangeImage,
    skeleton: SkeletonMask,
    params: NormalFieldParams,
    max_range: float | None = None,
) -> NormalFeatureField:
    """Sample skeleton pixels and fit weighted normals at each.

    Pixels are visited in row-major order and accepted independently with
    probability ``sample_fraction`` from a generator seeded by ``rng_seed``,
    so the result is reproducible. Accepted pixels whose gated neighborhood
    has fewer than ``min_neighbors`` members, or whose covariance is
    rank-deficient, contribute nothing.
    """
    if max_range is None:
        max_range = img.sensor.max_range
    if 2 * params.window + 1 > img.cols:
        raise InvalidInputError(f"window {params.window} spans more than the {img.cols} columns")
    rows_idx, cols_idx = np.nonzero(skeleton.mask)
    if len(rows_idx) == 0:
        return NormalFeatureField.empty()
    rng = np.random.default_rng(params.rng_seed)
    accepted = rng.random(len(rows_idx)) < params.sample_fraction
    rows_idx = rows_idx[accepted].astype(np.int64)
    cols_idx = cols_idx[accepted].astype(np.int64)
    if len(rows_idx) == 0:
        return NormalFeatureField.empty()

    counts, centroids, covs = _kernels.normal_window_stats(
        rows_idx, cols_idx, img.depth, img.pts,
        skeleton.mask, params.window, params.depth_gate,
    )
    enough = counts >= params.min_neighbors
    if not np.any(enough):
        return NormalFeatureField.empty()
    rows_idx = rows_idx[enough]
    cols_idx = cols_idx[enough]
    counts = counts[enough]
    centroids = centroids[enough]
    covs = covs[enough]

    normals, _, _, _, degenerate = _smallest_eigenvector_batch(covs)
    ok = ~degenerate
    if not np.any(ok):
        return NormalFeatureField.empty()
    rows_idx = rows_idx[ok]
    cols_idx = cols_idx[ok]
    counts = counts[ok]
    centroids = centroids[ok]
    normals = normals[ok]

    flip = (normals * centroids).sum(axis=1) > 0
    normals[flip] = -normals[flip]

    depths = img.depth[rows_idx, cols_idx]
    margin = np.maximum(max_range - depths, 0.0)
    weights = np.log(margin * counts + 1.0)
    return NormalFeatureField(
        unit_normals=normals,
        weights=weights,
        pixels=np.stack([rows_idx, cols_idx], axis=1),
        neighbor_counts=counts,
        depths=depths,
    )


def degeneration_degree(
    field: NormalFeatureField, min_features: int = 10
) -> DegenerationReport:
    """Reduce a normal field to the anisotropy ratio k and degree mu.

    Drops the z component of the weighted normals, finds the dominant 2D axis
    by PCA of the second-moment matrix, and compares absolute component mass
    along it against mass across it. Zero cross-axis mass is the perfectly
    degenerate case: k = inf, mu = 1.
    """
    if len(field) < min_features:
        raise InsufficientFeaturesError(
            f"{len(field)} features < required {min_features}"
        )
    vecs2 = field.weights[:, None] * field.unit_normals[:, :2]
    moment = vecs2.T @ vecs2
    _, evecs = np.linalg.eigh(moment)
    v_max = evecs[:, 1]
    v_min = evecs[:, 0]
    if v_max[0] < 0 or (v_max[0] == 0 and v_max[1] < 0):
        v_max = -v_max
    along = np.abs(vecs2 @ v_max).sum()
    across = np.abs(vecs2 @ v_min).sum()
    if across == 0.0:
        k = math.inf
        mu = 1.0
    else:
        k = max(float(along / across), 1.0)
        mu = 1.0 - 1.0 / k
    return DegenerationReport(
        k=k, mu=mu, principal_direction=v_max, num_features=len(field)
    )


def map_threshold(mu: float, beta0_min: float, beta0_max: float) -> float:
    """Linear map from degeneration degree to clustering threshold (degrees).

    mu = 0 (no degeneration) gives the strict ceiling, mu = 1 the lenient
    floor. Out-of-range mu clamps with a warning.
    """
    if not 0 < beta0_min < beta0_max < 90:
        raise InvalidInputError("need 0 < beta0_min < beta0_max < 90")
    if mu < 0 or mu > 1:
        warnings.warn(f"mu={mu} outside [0, 1]; clamping", stacklevel=2)
        mu = min(max(mu, 0.0), 1.0)
    return mu * (beta0_min - beta0_max) + beta0_max
