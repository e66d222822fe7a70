"""Readers and writers: KITTI velodyne .bin, an ASCII PCD subset, KITTI poses.

All readers reject malformed input with positional diagnostics instead of
silently truncating.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidInputError
from .evaluate import Trajectory
from .rangeimage import PointCloud

log = logging.getLogger(__name__)

_POINT_BYTES = 16  # 4 little-endian float32: x y z intensity

SCAN_FORMATS = {".bin": "kitti-bin", ".pcd": "pcd-ascii"}


@dataclass(frozen=True)
class ScanFile:
    """A scan on disk: path, format tag, and its position in a sequence."""

    path: Path
    format: str
    frame_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))
        if self.format not in SCAN_FORMATS.values():
            raise InvalidInputError(f"unknown scan format {self.format!r}")

    @classmethod
    def from_path(cls, path, frame_index: int = 0) -> "ScanFile":
        path = Path(path)
        fmt = SCAN_FORMATS.get(path.suffix)
        if fmt is None:
            raise InvalidInputError(f"cannot infer scan format from {path.name!r}")
        return cls(path=path, format=fmt, frame_index=frame_index)

    def load(self) -> PointCloud:
        if self.format == "pcd-ascii":
            xyz, _ = read_pcd(self.path)
            return PointCloud.from_xyz(xyz)
        return read_kitti_bin(self.path)


def read_kitti_bin(path) -> PointCloud:
    """Parse a KITTI velodyne scan; drops non-finite points with a logged count."""
    raw = Path(path).read_bytes()
    if len(raw) % _POINT_BYTES != 0:
        raise FormatError(
            f"{path}: size {len(raw)} not a multiple of {_POINT_BYTES}",
            offset=len(raw) - (len(raw) % _POINT_BYTES),
        )
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    finite = np.isfinite(data).all(axis=1)
    dropped = int((~finite).sum())
    if dropped:
        log.info("%s: dropped %d non-finite points", path, dropped)
        data = data[finite]
    return PointCloud(xyz=data[:, :3], intensity=data[:, 3])


def write_kitti_bin(cloud: PointCloud, path) -> None:
    data = np.empty((len(cloud), 4), dtype="<f4")
    data[:, :3] = cloud.xyz
    data[:, 3] = cloud.intensity
    Path(path).write_bytes(data.tobytes())


def write_pcd(path, xyz: np.ndarray, labels: np.ndarray) -> None:
    """ASCII PCD with fields x y z label (float32 coordinates, int label)."""
    xyz = np.asarray(xyz, dtype=np.float32).reshape(-1, 3)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != len(xyz):
        raise FormatError("labels length must match xyz")
    n = len(xyz)
    header = (
        "# .PCD v0.7 - Point Cloud Data file format\n"
        "VERSION 0.7\n"
        "FIELDS x y z label\n"
        "SIZE 4 4 4 4\n"
        "TYPE F F F I\n"
        "COUNT 1 1 1 1\n"
        f"WIDTH {n}\n"
        "HEIGHT 1\n"
        "VIEWPOINT 0 0 0 1 0 0 0\n"
        f"POINTS {n}\n"
        "DATA ascii\n"
    )
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header)
        for i in range(n):
            # %.9g round-trips float32 exactly
            fh.write(f"{xyz[i, 0]:.9g} {xyz[i, 1]:.9g} {xyz[i, 2]:.9g} {labels[i]:d}\n")


def read_pcd(path):
    """Read the ASCII PCD subset written by ``write_pcd``.

    Returns ``(xyz, labels)``; labels are zeros when the file has no label
    field. Raises FormatError with a line number on any malformed content.
    """
    lines = Path(path).read_text(encoding="ascii").splitlines()
    fields = None
    n_points = None
    data_start = None
    for i, line in enumerate(lines):
        if line.startswith("#"):
            continue
        key = line.split(" ", 1)[0]
        if key == "FIELDS":
            fields = line.split()[1:]
        elif key == "POINTS":
            try:
                n_points = int(line.split()[1])
            except (IndexError, ValueError):
                raise FormatError(f"{path}: bad POINTS at line {i + 1}", offset=i + 1)
        elif key == "DATA":
            if line.split()[1:] != ["ascii"]:
                raise FormatError(f"{path}: only DATA ascii supported (line {i + 1})", offset=i + 1)
            data_start = i + 1
            break
    if fields is None or n_points is None or data_start is None:
        raise FormatError(f"{path}: incomplete PCD header")
    if fields[:3] != ["x", "y", "z"]:
        raise FormatError(f"{path}: FIELDS must start with x y z, got {fields}")
    has_label = "label" in fields
    label_col = fields.index("label") if has_label else -1

    rows = [ln for ln in lines[data_start:] if ln.strip()]
    if len(rows) != n_points:
        raise FormatError(
            f"{path}: POINTS says {n_points} but found {len(rows)} data lines",
            offset=data_start + 1,
        )
    xyz = np.empty((n_points, 3), dtype=np.float64)
    labels = np.zeros(n_points, dtype=np.int64)
    for j, row in enumerate(rows):
        parts = row.split()
        if len(parts) != len(fields):
            raise FormatError(
                f"{path}: expected {len(fields)} columns at line {data_start + j + 1}",
                offset=data_start + j + 1,
            )
        try:
            xyz[j] = [float(parts[0]), float(parts[1]), float(parts[2])]
            if has_label:
                labels[j] = int(parts[label_col])
        except ValueError:
            raise FormatError(
                f"{path}: non-numeric value at line {data_start + j + 1}",
                offset=data_start + j + 1,
            )
    return xyz, labels


def write_labeled_cloud(result, path) -> None:
    """Write a frame's surviving points: label 1 = ground, cluster id + 1 >= 2.

    Removed points are omitted (label 0 is reserved for them); an all-removed
    frame yields a header-only file. Coordinates round-trip at float32
    precision.
    """
    img = result.image
    final = result.final.labels
    clustered = final > 0
    parts_xyz = []
    parts_lab = []
    if result.ground.num_ground:
        g = result.ground.mask
        parts_xyz.append(np.stack([img.x[g], img.y[g], img.z[g]], axis=1))
        parts_lab.append(np.ones(int(g.sum()), dtype=np.int64))
    if clustered.any():
        parts_xyz.append(np.stack([img.x[clustered], img.y[clustered], img.z[clustered]], axis=1))
        parts_lab.append(final[clustered].astype(np.int64) + 1)
    if parts_xyz:
        xyz = np.concatenate(parts_xyz, axis=0)
        labels = np.concatenate(parts_lab)
    else:
        xyz = np.zeros((0, 3))
        labels = np.zeros(0, dtype=np.int64)
    write_pcd(path, xyz, labels)


def read_kitti_poses(path) -> Trajectory:
    """One pose per line: flattened 3x4 row-major rigid transform."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 12:
                raise FormatError(
                    f"{path}: expected 12 values at line {i + 1}, got {len(parts)}",
                    offset=i + 1,
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise FormatError(f"{path}: non-numeric value at line {i + 1}", offset=i + 1)
    if not rows:
        raise FormatError(f"{path}: no poses found")
    return Trajectory.from_kitti_rows(np.asarray(rows))


def write_kitti_poses(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for pose in traj.poses:
            fh.write(" ".join(f"{v:.12g}" for v in pose[:3, :].ravel()) + "\n")
