"""Analytic scene generation by ray casting the sensor model.

Scenes are built from three primitives: vertical wall rectangles, yaw-rotated
boxes, and a ground plane. Every beam of the sensor is cast against every
primitive; the nearest hit inside the range gate becomes a return, optionally
perturbed by Gaussian range noise along the beam. Output order is row-major
over the range image, one point per hit beam, with exact per-point object
ids, so generated clouds double as clustering and IoU oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidSceneError
from .evaluate import LabeledBox
from .rangeimage import PointCloud, SensorModel, beam_grid

SCENE_KINDS = ("corridor", "room", "wall-pair", "clutter")


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Declarative scene description; all geometry is deterministic per seed."""

    kind: str
    sensor: SensorModel
    noise_sigma: float = 0.0
    seed: int = 0
    ground: bool = True
    sensor_height: float = 1.73
    corridor_length: float = 60.0
    corridor_width: float = 8.0
    wall_height: float = 4.0
    room_size: float = 30.0
    n_boxes: int = 5
    box_size_min: float = 0.5
    box_size_max: float = 3.0
    clutter_spread: float = 25.0
    # clutter only: pairs of distinct boxes separated by a small gap at near
    # range, the failure case for range-blind distance thresholds
    n_box_pairs: int = 0
    pair_gap: float = 0.4
    # orient every random box broadside to the sensor (road-scene-like);
    # default keeps yaw uniform
    boxes_face_sensor: bool = False
    wall_pair_depths: tuple = (5.0, 20.0)
    wall_pair_widths: tuple = (4.0, 12.0)
    # lateral center of each wall; the defaults leave one side of the far
    # wall visible past the near wall's edge, so the two surfaces meet as
    # adjacent pixels across a clean depth jump
    wall_pair_offsets: tuple = (0.0, 6.0)

    def __post_init__(self):
        if self.kind not in SCENE_KINDS:
            raise InvalidInputError(f"kind must be one of {SCENE_KINDS}, got {self.kind!r}")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be >= 0")
        for name in (
            "sensor_height", "corridor_length", "corridor_width", "wall_height",
            "room_size", "box_size_min", "box_size_max", "clutter_spread",
        ):
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"{name} must be positive")
        if self.n_boxes < 0:
            raise InvalidInputError("n_boxes must be >= 0")


@dataclass(frozen=True)
class _Wall:
    """Vertical rectangle from (x0, y0) to (x1, y1), z in [z_lo, z_hi]."""

    x0: float
    y0: float
    x1: float
    y1: float
    z_lo: float
    z_hi: float


@dataclass
class SceneTruth:
    """Generated cloud plus exact ground truth."""

    cloud: PointCloud
    object_ids: np.ndarray
    boxes: list[LabeledBox]
    box_object_ids: list[int]
    ground_plane: tuple | None
    ground_object_id: int | None
    spec: SyntheticSceneSpec = field(repr=False)

    @property
    def is_ground(self) -> np.ndarray:
        if self.ground_object_id is None:
            return np.zeros(len(self.object_ids), dtype=bool)
        return self.object_ids == self.ground_object_id


def _cast_wall(dirs: np.ndarray, wall: _Wall) -> np.ndarray:
    seg = np.array([wall.x1 - wall.x0, wall.y1 - wall.y0])
    seg_len = float(np.hypot(*seg))
    if seg_len <= 0:
        raise InvalidSceneError("wall has zero length")
    u = seg / seg_len
    normal = np.array([-u[1], u[0]])
    plane_offset = normal[0] * wall.x0 + normal[1] * wall.y0
    if abs(plane_offset) < 0.2:
        raise InvalidSceneError("wall plane passes through the sensor")
    denom = dirs[:, 0] * normal[0] + dirs[:, 1] * normal[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-12, plane_offset / denom, np.inf)
        t = np.where(t > 0, t, np.inf)
        hx = t * dirs[:, 0] - wall.x0
        hy = t * dirs[:, 1] - wall.y0
        s = hx * u[0] + hy * u[1]
        hz = t * dirs[:, 2]
        ok = (s >= 0) & (s <= seg_len) & (hz >= wall.z_lo) & (hz <= wall.z_hi)
    return np.where(ok, t, np.inf)


def _cast_box(dirs: np.ndarray, box: LabeledBox) -> np.ndarray:
    c, s = math.cos(-box.yaw), math.sin(-box.yaw)
    dx = c * dirs[:, 0] - s * dirs[:, 1]
    dy = s * dirs[:, 0] + c * dirs[:, 1]
    dz = dirs[:, 2]
    cx = c * box.center[0] - s * box.center[1]
    cy = s * box.center[0] + c * box.center[1]
    cz = box.center[2]
    half = box.dimensions / 2.0
    if abs(cx) <= half[0] and abs(cy) <= half[1] and abs(cz) <= half[2]:
        raise InvalidSceneError("sensor sits inside a box")
    t_near = np.full(len(dirs), -np.inf)
    t_far = np.full(len(dirs), np.inf)
    for d_axis, o_axis, h in ((dx, -cx, half[0]), (dy, -cy, half[1]), (dz, -cz, half[2])):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-h - o_axis) / d_axis
            t2 = (h - o_axis) / d_axis
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        parallel = np.abs(d_axis) < 1e-12
        inside = np.abs(o_axis) <= h
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
        t_near = np.maximum(t_near, lo)
        t_far = np.minimum(t_far, hi)
    hit = (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf)


def _cast_ground(dirs: np.ndarray, z_ground: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = z_ground / dirs[:, 2]
    return np.where((dirs[:, 2] < 0) & (t > 0), t, np.inf)


def _scene_primitives(spec: SyntheticSceneSpec, rng: np.random.Generator):
    """Returns (walls, boxes) for the scene kind."""
    zg = -spec.sensor_height
    z_hi = zg + spec.wall_height
    walls: list[_Wall] = []
    boxes: list[LabeledBox] = []
    if spec.kind == "corridor":
        hl = spec.corridor_length / 2.0
        hw = spec.corridor_width / 2.0
        walls.append(_Wall(-hl, -hw, hl, -hw, zg, z_hi))
        walls.append(_Wall(-hl, hw, hl, hw, zg, z_hi))
    elif spec.kind == "wall-pair":
        for depth, width, off in zip(
            spec.wall_pair_depths, spec.wall_pair_widths, spec.wall_pair_offsets
        ):
            walls.append(_Wall(depth, off - width / 2.0, depth, off + width / 2.0, zg, z_hi))
    elif spec.kind == "room":
        h = spec.room_size / 2.0
        walls.append(_Wall(-h, -h, h, -h, zg, z_hi))
        walls.append(_Wall(h, -h, h, h, zg, z_hi))
        walls.append(_Wall(h, h, -h, h, zg, z_hi))
        walls.append(_Wall(-h, h, -h, -h, zg, z_hi))
        boxes = _random_boxes(spec, rng, radius_lo=3.0, radius_hi=max(h - 3.0, 4.0))
    elif spec.kind == "clutter":
        boxes = _random_boxes(spec, rng, radius_lo=4.0, radius_hi=spec.clutter_spread)
        boxes.extend(_near_box_pairs(spec, rng))
    return walls, boxes


def _random_boxes(spec, rng, radius_lo, radius_hi) -> list[LabeledBox]:
    boxes = []
    zg = -spec.sensor_height
    for i in range(spec.n_boxes):
        dims = rng.uniform(spec.box_size_min, spec.box_size_max, size=3)
        # keep the box body clear of the sensor regardless of its size
        clearance = float(np.hypot(dims[0], dims[1])) / 2.0 + 1.0
        radius = rng.uniform(max(radius_lo, clearance), max(radius_hi, clearance + 1.0))
        angle = rng.uniform(0, 2 * np.pi)
        if spec.boxes_face_sensor:
            yaw = angle + np.pi / 2.0 + rng.normal(0, 0.15)
        else:
            yaw = rng.uniform(0, np.pi)
        center = np.array([radius * np.cos(angle), radius * np.sin(angle), zg + dims[2] / 2.0])
        boxes.append(LabeledBox(center=center, dimensions=dims, yaw=float(yaw), tag=f"box{i}"))
    return boxes


def _near_box_pairs(spec, rng) -> list[LabeledBox]:
    """Side-by-side box pairs at near range, roughly facing the sensor."""
    boxes = []
    zg = -spec.sensor_height
    for i in range(spec.n_box_pairs):
        dims = rng.uniform(spec.box_size_min, spec.box_size_max, size=3)
        radius = rng.uniform(5.0, 14.0)
        angle = rng.uniform(0, 2 * np.pi)
        yaw = angle + np.pi / 2 + rng.normal(0, 0.1)  # faces toward the sensor
        center = np.array([radius * np.cos(angle), radius * np.sin(angle), zg + dims[2] / 2.0])
        # the twin sits beside it along the pair's long axis
        shift = (dims[0] + spec.pair_gap) * np.array([np.cos(yaw), np.sin(yaw), 0.0])
        for j, c in enumerate((center, center + shift)):
            boxes.append(
                LabeledBox(center=c, dimensions=dims, yaw=float(yaw), tag=f"pair{i}_{j}")
            )
    return boxes


def generate_scene(spec: SyntheticSceneSpec) -> SceneTruth:
    """Ray-cast the scene; deterministic for a fixed spec (seed included)."""
    rng = np.random.default_rng(spec.seed)
    walls, boxes = _scene_primitives(spec, rng)
    sensor = spec.sensor
    dirs = beam_grid(sensor).reshape(-1, 3)

    casts = []
    prim_boxes: list[int] = []
    ground_id = None
    for wall in walls:
        casts.append(_cast_wall(dirs, wall))
    for box in boxes:
        prim_boxes.append(len(casts))
        casts.append(_cast_box(dirs, box))
    if spec.ground:
        ground_id = len(casts)
        casts.append(_cast_ground(dirs, -spec.sensor_height))
    if not casts:
        raise InvalidSceneError("scene has no primitives")

    t_all = np.stack(casts, axis=0)
    nearest = t_all.argmin(axis=0)
    t = t_all[nearest, np.arange(t_all.shape[1])]
    hit = np.isfinite(t)
    if spec.noise_sigma > 0:
        noise = rng.normal(0.0, spec.noise_sigma, size=int(hit.sum()))
        t_hit = t[hit] + noise
    else:
        t_hit = t[hit]
    in_gate = (t_hit >= sensor.min_range) & (t_hit <= sensor.max_range)

    dirs_hit = dirs[hit][in_gate]
    t_hit = t_hit[in_gate]
    xyz = dirs_hit * t_hit[:, None]
    object_ids = nearest[hit][in_gate].astype(np.int64)

    plane = (0.0, 0.0, 1.0, spec.sensor_height) if spec.ground else None
    return SceneTruth(
        cloud=PointCloud.from_xyz(xyz),
        object_ids=object_ids,
        boxes=boxes,
        box_object_ids=prim_boxes,
        ground_plane=plane,
        ground_object_id=ground_id,
        spec=spec,
    )
