import numpy as np
import pytest

from scanclean import (
    PointCloud,
    RangeImage,
    SensorModel,
    SyntheticSceneSpec,
    generate_scene,
    project,
)

# 16x900 is the grid used by the randomized oracle and monotonicity suites.
ORACLE_SENSOR = SensorModel.uniform(16, 900, 5.0, -22.0, 80.0)


@pytest.fixture
def small_sensor():
    return SensorModel.uniform(8, 64, 10.0, -20.0, 50.0)


@pytest.fixture
def oracle_sensor():
    return ORACLE_SENSOR


@pytest.fixture
def flat_image(small_sensor):
    """Fully occupied image: everything at 10 m."""
    return RangeImage.from_depth_grid(np.full((8, 64), 10.0), small_sensor)


def mixed_scene(seed, sensor=ORACLE_SENSOR, noise=0.02):
    """Corridor / room / clutter rotation used by the randomized suites."""
    kind = ("corridor", "room", "clutter")[seed % 3]
    spec = SyntheticSceneSpec(
        kind=kind,
        sensor=sensor,
        noise_sigma=noise,
        seed=seed,
        n_boxes=4 + seed % 5,
        ground=seed % 2 == 0,
    )
    return generate_scene(spec)


def scene_image(seed, sensor=ORACLE_SENSOR, noise=0.02):
    scene = mixed_scene(seed, sensor, noise)
    return project(scene.cloud, sensor)


def wall_cloud(depth, sensor, half_width=0.45, rows=None):
    """Points of a wall facing +x at the given depth, one per beam it covers."""
    from scanclean.rangeimage import beam_grid

    dirs = beam_grid(sensor).reshape(-1, 3)
    with np.errstate(divide="ignore"):
        t = depth / dirs[:, 0]
    ok = (dirs[:, 0] > 1e-9) & (np.abs(t * dirs[:, 1]) <= half_width * depth)
    if rows is not None:
        row_idx = np.repeat(np.arange(sensor.num_rings), sensor.num_cols)
        ok &= np.isin(row_idx, rows)
    pts = dirs[ok] * t[ok, None]
    return PointCloud.from_xyz(pts)
