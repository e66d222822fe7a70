"""Point cloud and range image data model.

A scan is projected onto a dense rows x cols grid indexed by (ring, azimuth
bin). Row 0 holds the highest-elevation ring. Azimuth is measured from the +x
axis, counter-clockwise, and wraps circularly across the column seam. A depth
of 0 is the universal "no return" sentinel; ``point_index`` is -1 there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import EmptyInputError, EmptyProjectionError, InvalidInputError, ZeroSeparationError

DEFAULT_MIN_RANGE = 0.5


class Point(NamedTuple):
    x: float
    y: float
    z: float
    intensity: float = 0.0


class PixelCoord(NamedTuple):
    row: int
    col: int


@dataclass
class PointCloud:
    """One revolution of LiDAR returns: (N, 3) coordinates plus intensity."""

    xyz: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        self.xyz = np.ascontiguousarray(self.xyz, dtype=np.float64)
        if self.xyz.ndim != 2 or self.xyz.shape[1] != 3:
            raise InvalidInputError(f"xyz must be (N, 3), got {self.xyz.shape}")
        self.intensity = np.ascontiguousarray(self.intensity, dtype=np.float64)
        if self.intensity.shape != (len(self.xyz),):
            raise InvalidInputError("intensity length must match xyz")

    @classmethod
    def from_xyz(cls, xyz, intensity=None) -> "PointCloud":
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if intensity is None:
            intensity = np.zeros(len(xyz))
        return cls(xyz=xyz, intensity=np.asarray(intensity, dtype=np.float64))

    @classmethod
    def from_points(cls, points) -> "PointCloud":
        pts = [(p.x, p.y, p.z, p.intensity) for p in points]
        arr = np.asarray(pts, dtype=np.float64).reshape(-1, 4)
        return cls(xyz=arr[:, :3], intensity=arr[:, 3])

    def __len__(self) -> int:
        return len(self.xyz)

    def point(self, i: int) -> Point:
        x, y, z = self.xyz[i]
        return Point(x, y, z, self.intensity[i])


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Spinning-LiDAR geometry: ring elevations, azimuth resolution, range gate.

    ``vertical_angles`` are per-ring elevations in degrees and must be strictly
    monotonic (either direction); internally rows are ordered top = highest
    elevation.
    """

    num_rings: int
    num_cols: int
    vertical_angles: np.ndarray
    max_range: float
    min_range: float = DEFAULT_MIN_RANGE

    def __eq__(self, other):
        if not isinstance(other, SensorModel):
            return NotImplemented
        return (
            self.num_rings == other.num_rings
            and self.num_cols == other.num_cols
            and self.max_range == other.max_range
            and self.min_range == other.min_range
            and np.array_equal(self.vertical_angles, other.vertical_angles)
        )

    def __post_init__(self):
        object.__setattr__(
            self, "vertical_angles", np.asarray(self.vertical_angles, dtype=np.float64)
        )
        if self.num_rings < 2:
            raise InvalidInputError("num_rings must be >= 2")
        if self.num_cols < 4:
            raise InvalidInputError("num_cols must be >= 4")
        if self.max_range <= 0:
            raise InvalidInputError("max_range must be positive")
        if not 0 <= self.min_range < self.max_range:
            raise InvalidInputError("min_range must be in [0, max_range)")
        va = self.vertical_angles
        if va.shape != (self.num_rings,):
            raise InvalidInputError("vertical_angles length must equal num_rings")
        diffs = np.diff(va)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise InvalidInputError("vertical_angles must be strictly monotonic")

    @property
    def horizontal_resolution(self) -> float:
        """Degrees of azimuth per column."""
        return 360.0 / self.num_cols

    @property
    def row_elevations(self) -> np.ndarray:
        """Per-row elevation in degrees, row 0 = highest."""
        va = self.vertical_angles
        return va[::-1].copy() if va[0] < va[-1] else va.copy()

    @classmethod
    def uniform(cls, num_rings, num_cols, elev_top, elev_bottom, max_range,
                min_range=DEFAULT_MIN_RANGE) -> "SensorModel":
        angles = np.linspace(elev_top, elev_bottom, num_rings)
        return cls(num_rings, num_cols, angles, max_range, min_range)

    @classmethod
    def hdl64(cls) -> "SensorModel":
        """64 rings, 1800 columns, +2 .. -24.8 deg, 120 m gate."""
        return cls.uniform(64, 1800, 2.0, -24.8, 120.0)

    @classmethod
    def vlp16(cls) -> "SensorModel":
        """16 rings, 1800 columns, +15 .. -15 deg, 100 m gate."""
        return cls.uniform(16, 1800, 15.0, -15.0, 100.0)


def _row_beam_components(sensor: SensorModel):
    """cos/sin of each row's elevation, row 0 = highest."""
    elev = np.deg2rad(sensor.row_elevations)
    return np.cos(elev), np.sin(elev)


def _angle_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between unit vectors along the last axis, accurate at small angles."""
    cross = np.cross(u, v)
    sin_a = np.sqrt((cross * cross).sum(axis=-1))
    cos_a = (u * v).sum(axis=-1)
    return np.arctan2(sin_a, cos_a)


def beam_direction(sensor: SensorModel, p: PixelCoord) -> np.ndarray:
    """Unit vector of the beam at pixel ``p`` (column-center azimuth)."""
    elev = np.deg2rad(sensor.row_elevations[p.row])
    az = np.deg2rad((p.col + 0.5) * sensor.horizontal_resolution)
    return np.array([np.cos(elev) * np.cos(az), np.cos(elev) * np.sin(az), np.sin(elev)])


def beam_grid(sensor: SensorModel) -> np.ndarray:
    """(rows, cols, 3) unit beam directions for every pixel."""
    ce, se = _row_beam_components(sensor)
    az = np.deg2rad((np.arange(sensor.num_cols) + 0.5) * sensor.horizontal_resolution)
    out = np.empty((sensor.num_rings, sensor.num_cols, 3))
    out[..., 0] = ce[:, None] * np.cos(az)[None, :]
    out[..., 1] = ce[:, None] * np.sin(az)[None, :]
    out[..., 2] = se[:, None]
    return out


def adjacent_beam_angles(sensor: SensorModel):
    """Per-row horizontal and per-row-pair vertical beam separations (radians).

    Returns ``(alpha_h, alpha_v)`` where ``alpha_h[r]`` separates columns c and
    c+1 on ring r, and ``alpha_v[r]`` separates rings r and r+1 at equal azimuth.
    """
    ce, se = _row_beam_components(sensor)
    dphi = np.deg2rad(sensor.horizontal_resolution)
    u = np.stack([ce, np.zeros_like(ce), se], axis=-1)
    v = np.stack([ce * np.cos(dphi), ce * np.sin(dphi), se], axis=-1)
    alpha_h = _angle_between(u, v)
    elev = np.deg2rad(sensor.row_elevations)
    alpha_v = np.abs(np.diff(elev))
    return alpha_h, alpha_v


def window_beam_sin_table(sensor: SensorModel, window: int) -> np.ndarray:
    """sin of the beam separation for every (row, row offset, |col offset|).

    Shape (rows, 2*window+1, window+1), indexed ``[r, dr + window, |dc|]``.
    Rows clipped out of range hold unused values.
    """
    elev = np.deg2rad(sensor.row_elevations)
    rows = sensor.num_rings
    table = np.zeros((rows, 2 * window + 1, window + 1))
    r = np.arange(rows)
    for dr in range(-window, window + 1):
        rn = np.clip(r + dr, 0, rows - 1)
        for adc in range(window + 1):
            dphi = np.deg2rad(adc * sensor.horizontal_resolution)
            u = np.stack([np.cos(elev[r]), np.zeros(rows), np.sin(elev[r])], axis=-1)
            v = np.stack(
                [np.cos(elev[rn]) * np.cos(dphi), np.cos(elev[rn]) * np.sin(dphi), np.sin(elev[rn])],
                axis=-1,
            )
            alpha = _angle_between(u, v)
            table[:, dr + window, adc] = np.sin(alpha)
    return table


@dataclass
class RangeImage:
    """Dense depth grid with back-pointers into the source cloud.

    ``depth`` is 0 where no return landed, and ``point_index`` is -1 exactly
    there. ``pts`` packs x, y, z, depth per pixel (zeros at holes) so grid
    kernels touch one cache line per probe; ``x``/``y``/``z`` are views into
    it. All arrays are read-only; share freely across threads.
    """

    depth: np.ndarray
    point_index: np.ndarray
    sensor: SensorModel
    pts: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.depth, self.point_index, self.pts):
            arr.setflags(write=False)

    @property
    def x(self) -> np.ndarray:
        return self.pts[..., 0]

    @property
    def y(self) -> np.ndarray:
        return self.pts[..., 1]

    @property
    def z(self) -> np.ndarray:
        return self.pts[..., 2]

    @property
    def rows(self) -> int:
        return self.depth.shape[0]

    @property
    def cols(self) -> int:
        return self.depth.shape[1]

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0

    @property
    def num_valid(self) -> int:
        return int(np.count_nonzero(self.depth))

    def point_at(self, p: PixelCoord) -> np.ndarray:
        return self.pts[p.row, p.col, :3].copy()

    @classmethod
    def from_depth_grid(cls, depth, sensor: SensorModel) -> "RangeImage":
        """Build an image from a synthetic depth grid.

        Points are reconstructed on the canonical beam directions and indexed
        in row-major order over valid pixels, matching ``unproject``.
        """
        depth = np.ascontiguousarray(depth, dtype=np.float64)
        if depth.shape != (sensor.num_rings, sensor.num_cols):
            raise InvalidInputError(
                f"depth grid {depth.shape} does not match sensor "
                f"({sensor.num_rings}, {sensor.num_cols})"
            )
        dirs = beam_grid(sensor)
        valid = depth > 0
        pts = np.zeros(depth.shape + (4,))
        pts[..., :3] = np.where(valid[..., None], dirs * depth[..., None], 0.0)
        pts[..., 3] = depth
        point_index = np.full(depth.shape, -1, dtype=np.int32)
        point_index[valid] = np.arange(np.count_nonzero(valid), dtype=np.int32)
        return cls(depth=depth, point_index=point_index, sensor=sensor, pts=pts)


def project(cloud: PointCloud, sensor: SensorModel) -> RangeImage:
    """Project a cloud onto the sensor's range image.

    A point lands in the row of the nearest ring elevation and the column of
    its azimuth bin; when several points share a pixel the nearest survives.
    Points outside [min_range, max_range], outside the vertical field of view
    (plus half a ring spacing at each end), or non-finite are discarded.

    Raises EmptyInputError for an empty cloud and EmptyProjectionError when
    nothing lands.
    """
    if len(cloud) == 0:
        raise EmptyInputError("cannot project an empty cloud")
    asc = sensor.row_elevations[::-1]  # ascending elevations
    half_lo = (asc[1] - asc[0]) / 2.0
    half_hi = (asc[-1] - asc[-2]) / 2.0
    # Comparisons run in sine space: sine is strictly increasing over
    # [-90, 90] deg, so binning against the sines of the angle midpoints is
    # exactly nearest-elevation binning without per-point arcsin.
    lo = max(asc[0] - half_lo, -90.0)
    hi = min(asc[-1] + half_hi, 90.0)
    sin_mids = np.sin(np.deg2rad((asc[1:] + asc[:-1]) / 2.0))
    depth_grid, point_index, pts, kept = _kernels.project_scan(
        cloud.xyz,
        sin_mids,
        math.sin(math.radians(lo)),
        math.sin(math.radians(hi)),
        max(sensor.min_range, 1e-12),
        sensor.max_range,
        math.radians(sensor.horizontal_resolution),
        sensor.num_rings,
        sensor.num_cols,
    )
    if kept == 0:
        raise EmptyProjectionError("no point within range and field of view")
    return RangeImage(depth=depth_grid, point_index=point_index, sensor=sensor, pts=pts)


def unproject(img: RangeImage) -> PointCloud:
    """Reconstruct a cloud from the depth grid on canonical beam directions.

    Points come out in row-major order over valid pixels with zero intensity.
    Re-projecting them lands every point back in its pixel, with depths equal
    to within float norm round-trip error (~1 ulp).
    """
    valid = img.valid
    dirs = beam_grid(img.sensor)[valid]
    depths = img.depth[valid]
    return PointCloud.from_xyz(dirs * depths[:, None])


def neighbors(img: RangeImage, p: PixelCoord, window: int) -> list[PixelCoord]:
    """Valid pixels within the window around ``p``, excluding ``p`` itself.

    Rows clip at the image edge; columns wrap. Order is row-major over the
    window.
    """
    if window < 1:
        raise InvalidInputError("window must be >= 1")
    if 2 * window + 1 > img.cols:
        raise InvalidInputError(f"window {window} spans more than the {img.cols} columns")
    if not (0 <= p.row < img.rows and 0 <= p.col < img.cols):
        raise InvalidInputError(f"pixel {p} out of bounds")
    out = []
    for dr in range(-window, window + 1):
        rn = p.row + dr
        if rn < 0 or rn >= img.rows:
            continue
        for dc in range(-window, window + 1):
            if dr == 0 and dc == 0:
                continue
            cn = (p.col + dc) % img.cols
            if img.depth[rn, cn] > 0:
                out.append(PixelCoord(rn, cn))
    return out


def beam_angle(img: RangeImage, a: PixelCoord, b: PixelCoord) -> float:
    """Angular separation in degrees between the beams of two pixels."""
    if a == b:
        raise ZeroSeparationError(f"identical pixels {a}")
    u = beam_direction(img.sensor, a)
    v = beam_direction(img.sensor, b)
    return float(np.degrees(_angle_between(u, v)))
