import math

import numpy as np
import pytest

from scanclean import (
    DegenerateNeighborhoodError,
    InsufficientFeaturesError,
    InvalidInputError,
    NormalFeatureField,
    NormalFieldParams,
    PixelCoord,
    RangeImage,
    SensorModel,
    SkeletonMask,
    TooFewPointsError,
    degeneration_degree,
    extract_normal_field,
    map_threshold,
    neighborhood_set,
    normal_weight,
    pca_normal,
)

from oracles import pca_normal_reference


def image_and_skeleton(depth, sensor, skeleton=None):
    img = RangeImage.from_depth_grid(depth, sensor)
    mask = img.valid.copy() if skeleton is None else skeleton
    return img, SkeletonMask(mask=mask)


def field_from_normals(normals, weights):
    normals = np.asarray(normals, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    m = len(weights)
    return NormalFeatureField(
        unit_normals=normals,
        weights=weights,
        pixels=np.zeros((m, 2), dtype=np.int64),
        neighbor_counts=np.full(m, 25, dtype=np.int64),
        depths=np.full(m, 10.0),
    )


class TestNeighborhoodSet:
    def test_flat_wall_full_window(self, small_sensor):
        img, skel = image_and_skeleton(np.full((8, 64), 10.0), small_sensor)
        pts = neighborhood_set(img, skel, PixelCoord(4, 30), NormalFieldParams())
        assert pts.shape == (25, 3)

    def test_gate_is_on_depth_difference_not_absolute_depth(self, small_sensor):
        # every depth far exceeds the gate value; only differences matter
        img, skel = image_and_skeleton(np.full((8, 64), 10.0), small_sensor)
        params = NormalFieldParams(depth_gate=0.5)
        pts = neighborhood_set(img, skel, PixelCoord(4, 30), params)
        assert len(pts) == 25

    def test_depth_jump_excluded(self, small_sensor):
        depth = np.full((8, 64), 10.0)
        depth[:, 32:] = 20.0
        img, skel = image_and_skeleton(depth, small_sensor)
        pts = neighborhood_set(img, skel, PixelCoord(4, 31), NormalFieldParams())
        # window cols 29..33: the two far-side columns fail the gate
        assert len(pts) == 15

    def test_only_skeleton_pixels_count(self, small_sensor):
        depth = np.full((8, 64), 10.0)
        mask = np.zeros((8, 64), dtype=bool)
        mask[4, 30] = True
        mask[4, 31] = True
        img, skel = image_and_skeleton(depth, small_sensor, mask)
        pts = neighborhood_set(img, skel, PixelCoord(4, 30), NormalFieldParams())
        assert len(pts) == 2

    def test_requires_skeleton_pixel(self, small_sensor):
        depth = np.full((8, 64), 10.0)
        mask = np.zeros((8, 64), dtype=bool)
        img, skel = image_and_skeleton(depth, small_sensor, mask)
        with pytest.raises(InvalidInputError):
            neighborhood_set(img, skel, PixelCoord(4, 30), NormalFieldParams())

    def test_column_wrap(self, small_sensor):
        img, skel = image_and_skeleton(np.full((8, 64), 10.0), small_sensor)
        pts = neighborhood_set(img, skel, PixelCoord(4, 0), NormalFieldParams())
        assert len(pts) == 25


class TestPcaNormal:
    def test_horizontal_plane(self):
        rng = np.random.default_rng(0)
        pts = np.column_stack([rng.uniform(-1, 1, 30), rng.uniform(-1, 1, 30), np.full(30, -2.0)])
        n = pca_normal(pts)
        # oriented toward the sensor: the plane sits below, so the normal points up
        np.testing.assert_allclose(n, [0.0, 0.0, 1.0], atol=1e-12)

    def test_diagonal_vertical_plane(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(-1, 1, 40)
        z = rng.uniform(-1, 1, 40)
        # plane x + y = 4
        pts = np.column_stack([2.0 + s, 2.0 - s, z])
        n = pca_normal(pts)
        expected = -np.array([1.0, 1.0, 0.0]) / math.sqrt(2)  # toward origin
        np.testing.assert_allclose(n, expected, atol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            pca_normal(np.zeros((2, 3)))
        with pytest.raises(TooFewPointsError):
            pca_normal(np.eye(3) + 5, min_points=5)

    def test_collinear_points_degenerate(self):
        t = np.linspace(0, 1, 10)
        pts = np.column_stack([t, 2 * t, 3 * t]) + np.array([5.0, 0.0, 0.0])
        with pytest.raises(DegenerateNeighborhoodError):
            pca_normal(pts)

    def test_identical_points_degenerate(self):
        with pytest.raises(DegenerateNeighborhoodError):
            pca_normal(np.full((5, 3), 2.0))

    def test_noisy_planes_match_truth_and_reference(self):
        rng = np.random.default_rng(42)
        worst_truth = 0.0
        worst_ref = 0.0
        for _ in range(200):
            # random plane through a point ~10 m out
            normal = rng.normal(size=3)
            normal /= np.linalg.norm(normal)
            center = rng.uniform(5, 15) * rng.normal(size=3)
            u = np.cross(normal, [1.0, 0.3, 0.2])
            u /= np.linalg.norm(u)
            v = np.cross(normal, u)
            a = rng.uniform(-0.5, 0.5, 25)
            b = rng.uniform(-0.5, 0.5, 25)
            pts = center + a[:, None] * u + b[:, None] * v
            pts += rng.normal(0, 0.01, (25, 3))
            got = pca_normal(pts)
            ref = pca_normal_reference(pts)
            ang_truth = math.degrees(math.acos(min(1.0, abs(float(got @ normal)))))
            ang_ref = math.acos(min(1.0, abs(float(got @ ref))))
            worst_truth = max(worst_truth, ang_truth)
            worst_ref = max(worst_ref, ang_ref)
        assert worst_truth < 2.0  # degrees
        assert worst_ref < 1e-6  # radians


class TestNormalWeight:
    def test_zero_neighbors(self):
        assert normal_weight(10.0, 0, 120.0) == 0.0

    def test_depth_at_limit(self):
        assert normal_weight(120.0, 25, 120.0) == 0.0

    def test_frozen_value(self):
        assert normal_weight(20.0, 25, 120.0) == pytest.approx(7.824445930877619, abs=1e-12)

    def test_beyond_limit_clamps(self):
        assert normal_weight(150.0, 25, 120.0) == 0.0

    def test_negative_count_rejected(self):
        with pytest.raises(InvalidInputError):
            normal_weight(10.0, -1, 120.0)


class TestExtractNormalField:
    def test_full_sampling_on_wall_patch(self, small_sensor):
        from scanclean.rangeimage import beam_grid

        # true planar wall at x = 10: depth = 10 / direction_x
        dirs = beam_grid(small_sensor)
        with np.errstate(divide="ignore"):
            depth = np.where(dirs[..., 0] > 0.3, 10.0 / dirs[..., 0], 0.0)
        mask = np.zeros((8, 64), dtype=bool)
        mask[2:7, 2:7] = True  # 5x5 skeleton patch facing the wall
        img, skel = image_and_skeleton(depth, small_sensor, mask)
        params = NormalFieldParams(sample_fraction=1.0, min_neighbors=5, depth_gate=5.0)
        field = extract_normal_field(img, skel, params)
        assert len(field) == 25
        spread = np.abs(field.unit_normals - field.unit_normals[0]).max()
        assert spread < 1e-6
        np.testing.assert_allclose(field.unit_normals[0], [-1.0, 0.0, 0.0], atol=1e-9)

    def test_sampling_count_within_binomial_bounds(self):
        sensor = SensorModel.uniform(100, 100, 10.0, -20.0, 120.0)
        img, skel = image_and_skeleton(np.full((100, 100), 10.0), sensor)
        params = NormalFieldParams(sample_fraction=0.1, rng_seed=123)
        field = extract_normal_field(img, skel, params)
        assert 850 <= len(field) <= 1150

    def test_isolated_pixels_give_no_features(self, small_sensor):
        depth = np.zeros((8, 64))
        depth[2, 10] = 10.0
        depth[5, 40] = 12.0
        img, skel = image_and_skeleton(depth, small_sensor)
        field = extract_normal_field(img, skel, NormalFieldParams(sample_fraction=1.0))
        assert len(field) == 0

    def test_deterministic_under_seed(self, small_sensor):
        img, skel = image_and_skeleton(np.full((8, 64), 10.0), small_sensor)
        params = NormalFieldParams(sample_fraction=0.5, rng_seed=7)
        a = extract_normal_field(img, skel, params)
        b = extract_normal_field(img, skel, params)
        np.testing.assert_array_equal(a.pixels, b.pixels)
        np.testing.assert_array_equal(a.unit_normals, b.unit_normals)
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_weights_match_scalar_op(self, small_sensor):
        img, skel = image_and_skeleton(np.full((8, 64), 10.0), small_sensor)
        params = NormalFieldParams(sample_fraction=1.0)
        field = extract_normal_field(img, skel, params)
        for i in range(0, len(field), 37):
            feat = field[i]
            expected = normal_weight(feat.depth, feat.neighbor_count, img.sensor.max_range)
            assert feat.weight == pytest.approx(expected, rel=1e-12)

    def test_empty_skeleton(self, small_sensor):
        img, skel = image_and_skeleton(
            np.full((8, 64), 10.0), small_sensor, np.zeros((8, 64), dtype=bool)
        )
        field = extract_normal_field(img, skel, NormalFieldParams())
        assert len(field) == 0

    def test_params_validation(self):
        with pytest.raises(InvalidInputError):
            NormalFieldParams(sample_fraction=0.0)
        with pytest.raises(InvalidInputError):
            NormalFieldParams(min_neighbors=2)
        with pytest.raises(InvalidInputError):
            NormalFieldParams(depth_gate=0.0)


class TestDegenerationDegree:
    def test_single_axis_normals_are_fully_degenerate(self):
        normals = np.array([[1.0, 0, 0], [-1.0, 0, 0]] * 10)
        report = degeneration_degree(field_from_normals(normals, np.ones(20)))
        assert math.isinf(report.k)
        assert report.mu == 1.0

    def test_even_spread_is_isotropic(self):
        angles = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
        normals = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(1000)])
        report = degeneration_degree(field_from_normals(normals, np.ones(1000)))
        assert report.mu < 0.1

    def test_random_spread_is_isotropic(self):
        rng = np.random.default_rng(5)
        angles = rng.uniform(0, 2 * np.pi, 1000)
        normals = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(1000)])
        report = degeneration_degree(field_from_normals(normals, np.ones(1000)))
        assert report.mu < 0.1

    def test_exact_k_two(self):
        # 2:1 mass ratio between the axes
        normals = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0]] * 5)
        weights = np.tile([2.0, 2.0, 1.0, 1.0], 5)
        report = degeneration_degree(field_from_normals(normals, weights))
        assert report.k == pytest.approx(2.0, abs=1e-12)
        assert report.mu == pytest.approx(0.5, abs=1e-12)

    def test_exact_k_one(self):
        normals = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 1.0, 0], [0, -1.0, 0]] * 5)
        report = degeneration_degree(field_from_normals(normals, np.ones(20)))
        assert report.k == pytest.approx(1.0, abs=1e-12)
        assert report.mu == pytest.approx(0.0, abs=1e-12)

    def test_mu_equals_one_minus_inverse_k(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            angles = rng.uniform(0, 2 * np.pi, 50)
            normals = np.column_stack([np.cos(angles), np.sin(angles), np.zeros(50)])
            report = degeneration_degree(field_from_normals(normals, rng.uniform(0, 3, 50)))
            if math.isfinite(report.k):
                assert report.mu == pytest.approx(1.0 - 1.0 / report.k, abs=1e-15)
                assert report.k >= 1.0

    def test_insufficient_features(self):
        normals = np.array([[1.0, 0, 0]] * 5)
        with pytest.raises(InsufficientFeaturesError):
            degeneration_degree(field_from_normals(normals, np.ones(5)), min_features=10)

    def test_zero_weights_follow_infinite_convention(self):
        normals = np.array([[1.0, 0, 0], [0, 1.0, 0]] * 10)
        report = degeneration_degree(field_from_normals(normals, np.zeros(20)))
        assert math.isinf(report.k)
        assert report.mu == 1.0

    def test_weighted_features_at_limit_contribute_nothing(self):
        # features with zero weight cannot pull k away from the others
        normals = np.array([[1.0, 0, 0], [-1.0, 0, 0]] * 10 + [[0, 1.0, 0]] * 10)
        weights = np.array([1.0] * 20 + [0.0] * 10)
        report = degeneration_degree(field_from_normals(normals, weights))
        assert math.isinf(report.k)

    def test_principal_direction_is_unit_and_sign_normalized(self):
        normals = np.array([[0, 1.0, 0], [0, -1.0, 0]] * 10)
        report = degeneration_degree(field_from_normals(normals, np.ones(20)))
        assert np.linalg.norm(report.principal_direction) == pytest.approx(1.0)
        assert abs(report.principal_direction[1]) == pytest.approx(1.0, abs=1e-12)
        assert report.principal_direction[1] > 0 or report.principal_direction[0] > 0

    def test_report_serialization_round_trip(self):
        from scanclean import DegenerationReport

        normals = np.array([[1.0, 0, 0], [-1.0, 0, 0]] * 10)
        report = degeneration_degree(field_from_normals(normals, np.ones(20)))
        report.beta0_dynamic = 10.0
        report.frame_id = 3
        back = DegenerationReport.from_dict(report.to_dict())
        assert math.isinf(back.k)
        assert back.mu == report.mu
        assert back.frame_id == 3


class TestMapThreshold:
    def test_endpoints_exact(self):
        assert map_threshold(0.0, 10.0, 60.0) == 60.0
        assert map_threshold(1.0, 10.0, 60.0) == 10.0

    def test_midpoint(self):
        assert map_threshold(0.5, 10.0, 60.0) == pytest.approx(35.0, abs=1e-12)

    def test_strictly_decreasing_with_full_range(self):
        values = [map_threshold(mu, 10.0, 60.0) for mu in np.linspace(0, 1, 11)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert min(values) == 10.0 and max(values) == 60.0

    def test_clamps_with_warning(self):
        with pytest.warns(UserWarning):
            assert map_threshold(1.5, 10.0, 60.0) == 10.0
        with pytest.warns(UserWarning):
            assert map_threshold(-0.5, 10.0, 60.0) == 60.0

    def test_range_validation(self):
        with pytest.raises(InvalidInputError):
            map_threshold(0.5, 60.0, 10.0)
        with pytest.raises(InvalidInputError):
            map_threshold(0.5, 10.0, 95.0)


class TestRotationInvariance:
    def test_k_and_mu_invariant_under_z_rotation(self, oracle_sensor):
        from scanclean import PointCloud, SyntheticSceneSpec, generate_scene, project
        from scanclean import classify_ground, depth_cluster, euclidean_cluster
        from scanclean import DepthClusterParams, EuclideanClusterParams, extract_skeleton

        spec = SyntheticSceneSpec(kind="room", sensor=oracle_sensor, seed=3, noise_sigma=0.01)
        scene = generate_scene(spec)
        params = NormalFieldParams(sample_fraction=1.0)  # full sampling: same pixel set

        def run(cloud):
            img = project(cloud, oracle_sensor)
            ground = classify_ground(img)
            d = depth_cluster(img, ground, DepthClusterParams(10.0))
            e = euclidean_cluster(img, ground, EuclideanClusterParams())
            skel = extract_skeleton(e, d, 100, 30)
            field = extract_normal_field(img, skel, params)
            return degeneration_degree(field)

        base = run(scene.cloud)
        # rotate by an exact multiple of the column resolution: same pixels
        theta = math.radians(90.0)
        rot = np.array(
            [[math.cos(theta), -math.sin(theta), 0], [math.sin(theta), math.cos(theta), 0], [0, 0, 1]]
        )
        rotated = run(PointCloud.from_xyz(scene.cloud.xyz @ rot.T))
        assert rotated.k == pytest.approx(base.k, abs=1e-6)
        assert rotated.mu == pytest.approx(base.mu, abs=1e-6)
        # principal direction co-rotates (up to sign)
        co = abs(float(np.dot(rot[:2, :2] @ base.principal_direction, rotated.principal_direction)))
        assert co == pytest.approx(1.0, abs=1e-6)
