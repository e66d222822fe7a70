import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scanclean import (
    ClusterLabeling,
    DepthClusterParams,
    EuclideanClusterParams,
    InvalidDepthError,
    InvalidInputError,
    RangeImage,
    SyntheticSceneSpec,
    adaptive_threshold,
    beta,
    classify_ground,
    depth_cluster,
    euclidean_cluster,
    filter_small_clusters,
    generate_scene,
    project,
)

from conftest import scene_image
from oracles import (
    beta_reference,
    brute_depth_cluster,
    brute_euclid_cluster,
    is_refinement,
    partitions_equal,
    threshold_reference,
)


class TestBeta:
    def test_equal_depths_give_ninety_minus_half_alpha(self):
        for alpha in (0.2, 1.0, 5.0, 30.0):
            for d in (0.5, 10.0, 80.0):
                assert beta(d, d, alpha) == pytest.approx(90.0 - alpha / 2.0, abs=1e-9)

    def test_known_values_against_independent_evaluation(self):
        got = beta(2.0, 1.0, 0.2)
        assert got == pytest.approx(0.19999756309775776, abs=1e-12)
        assert got == pytest.approx(beta_reference(2.0, 1.0, 0.2), abs=1e-12)

    def test_small_depth_step_stays_wide(self):
        got = beta(10.0, 9.999, 0.2)
        assert got == pytest.approx(beta_reference(10.0, 9.999, 0.2), abs=1e-12)
        assert got == pytest.approx(88.25896529650379, abs=1e-9)
        assert 45.0 < got < 89.9

    def test_argument_order_is_irrelevant(self):
        assert beta(3.0, 7.0, 1.0) == beta(7.0, 3.0, 1.0)

    def test_obtuse_branch(self):
        # denominator <= 0 lands in (90, 180)
        got = beta(1.0, 1.0, 150.0)
        assert 15.0 == pytest.approx(got, abs=1e-9)
        assert beta(1.0, 0.999, 120.0) > 90.0 or beta(1.0, 0.999, 120.0) < 90.0

    def test_invalid_inputs(self):
        with pytest.raises(InvalidDepthError):
            beta(0.0, 1.0, 1.0)
        with pytest.raises(InvalidDepthError):
            beta(1.0, -1.0, 1.0)
        with pytest.raises(InvalidInputError):
            beta(1.0, 1.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(
        d1=st.floats(0.1, 100.0),
        d2=st.floats(0.1, 100.0),
        alpha=st.floats(0.01, 90.0),
    )
    def test_matches_reference_everywhere(self, d1, d2, alpha):
        assert beta(d1, d2, alpha) == pytest.approx(beta_reference(d1, d2, alpha), abs=1e-9)


class TestAdaptiveThreshold:
    def test_frozen_value(self):
        got = adaptive_threshold(10.0, 0.2, 1.2)
        assert got == pytest.approx(0.04188781698268479, abs=1e-12)
        assert got == pytest.approx(threshold_reference(10.0, 0.2, 1.2), abs=1e-12)

    def test_right_angle(self):
        assert adaptive_threshold(1.0, 90.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_linear_in_depth(self):
        assert adaptive_threshold(20.0, 0.2, 1.2) == pytest.approx(
            2.0 * adaptive_threshold(10.0, 0.2, 1.2), rel=1e-12
        )

    def test_invalid_depth(self):
        with pytest.raises(InvalidDepthError):
            adaptive_threshold(0.0, 0.2, 1.2)


def wall_pair_image(sensor):
    spec = SyntheticSceneSpec(kind="wall-pair", sensor=sensor, ground=False)
    return project(generate_scene(spec).cloud, sensor)


class TestDepthCluster:
    def test_flat_wall_is_one_cluster(self, flat_image):
        lab = depth_cluster(flat_image, None, DepthClusterParams(10.0))
        assert lab.num_clusters == 1
        assert lab.cluster_sizes[1] == flat_image.num_valid

    def test_two_separated_walls_are_two_clusters(self, oracle_sensor):
        # near wall partially occludes the far one, so the two surfaces meet
        # as adjacent pixels across a 5 m -> 20 m depth jump
        img = wall_pair_image(oracle_sensor)
        for beta0 in (5.0, 45.0):
            lab = depth_cluster(img, None, DepthClusterParams(beta0))
            assert lab.num_clusters == 2
        # the separating edges really do fail the criterion
        alpha_h = oracle_sensor.horizontal_resolution
        assert beta_reference(5.0, 20.0, alpha_h) < 5.0

    def test_threshold_refines(self, oracle_sensor):
        for seed in range(4):
            img = scene_image(seed)
            lenient = depth_cluster(img, None, DepthClusterParams(10.0))
            strict = depth_cluster(img, None, DepthClusterParams(60.0))
            assert is_refinement(strict.labels, lenient.labels)

    def test_matches_brute_force_oracle(self, oracle_sensor):
        for seed in (0, 1, 2):
            img = scene_image(seed)
            ground = classify_ground(img)
            lab = depth_cluster(img, ground, DepthClusterParams(10.0))
            ref = brute_depth_cluster(img, ground.mask, 10.0)
            assert partitions_equal(lab.labels, ref)

    def test_deterministic(self, oracle_sensor):
        img = scene_image(3)
        a = depth_cluster(img, None, DepthClusterParams(10.0))
        b = depth_cluster(img, None, DepthClusterParams(10.0))
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_labels_are_row_major_discovery_order(self, flat_image):
        lab = depth_cluster(flat_image, None, DepthClusterParams(10.0))
        first = np.argwhere(lab.labels == 1)
        assert (first[0] == [0, 0]).all()

    def test_empty_image(self, small_sensor):
        img = RangeImage.from_depth_grid(np.zeros((8, 64)), small_sensor)
        lab = depth_cluster(img, None, DepthClusterParams(10.0))
        assert lab.num_clusters == 0
        assert not lab.labels.any()

    def test_params_validation(self):
        with pytest.raises(InvalidInputError):
            DepthClusterParams(0.0)
        with pytest.raises(InvalidInputError):
            DepthClusterParams(90.0)


class TestEuclideanCluster:
    def test_flat_wall_is_one_cluster(self, flat_image):
        lab = euclidean_cluster(flat_image, None, EuclideanClusterParams())
        assert lab.num_clusters == 1

    def test_separated_objects_split(self, oracle_sensor):
        img = wall_pair_image(oracle_sensor)
        lab = euclidean_cluster(img, None, EuclideanClusterParams())
        assert lab.num_clusters == 2

    def test_matches_brute_force_oracle(self, oracle_sensor):
        for seed in (0, 1, 2):
            img = scene_image(seed)
            ground = classify_ground(img)
            lab = euclidean_cluster(img, ground, EuclideanClusterParams())
            ref = brute_euclid_cluster(img, ground.mask, 1.2, 2)
            assert partitions_equal(lab.labels, ref)

    def test_fixed_eps_matches_brute_force_oracle(self, oracle_sensor):
        img = scene_image(2)
        params = EuclideanClusterParams(window=2, fixed_eps=0.75)
        lab = euclidean_cluster(img, None, params)
        ref = brute_euclid_cluster(img, np.zeros_like(img.valid), 1.2, 2, fixed_eps=0.75)
        assert partitions_equal(lab.labels, ref)

    def test_gamma_merges_only(self, oracle_sensor):
        for seed in range(4):
            img = scene_image(seed)
            tight = euclidean_cluster(img, None, EuclideanClusterParams(gamma=1.0))
            loose = euclidean_cluster(img, None, EuclideanClusterParams(gamma=1.5))
            assert is_refinement(tight.labels, loose.labels)

    def test_ground_pixels_never_labeled(self, oracle_sensor):
        img = scene_image(0)
        ground = classify_ground(img)
        for lab in (
            euclidean_cluster(img, ground, EuclideanClusterParams()),
            depth_cluster(img, ground, DepthClusterParams(10.0)),
        ):
            assert not lab.labels[ground.mask].any()

    def test_sizes_table_consistent(self, oracle_sensor):
        img = scene_image(1)
        lab = euclidean_cluster(img, None, EuclideanClusterParams())
        counts = np.bincount(lab.labels.ravel(), minlength=lab.num_clusters + 1)
        counts[0] = 0
        np.testing.assert_array_equal(lab.cluster_sizes, counts)
        assert lab.cluster_sizes.sum() == (lab.labels > 0).sum()

    def test_params_validation(self):
        with pytest.raises(InvalidInputError):
            EuclideanClusterParams(gamma=0.5)
        with pytest.raises(InvalidInputError):
            EuclideanClusterParams(window=0)
        with pytest.raises(InvalidInputError):
            EuclideanClusterParams(fixed_eps=-1.0)


def handmade_labeling(sizes: dict) -> ClusterLabeling:
    """A 1 x N labeling with the requested cluster sizes laid out in order."""
    total = sum(sizes.values())
    labels = np.zeros((1, total), dtype=np.int32)
    pos = 0
    for cid, size in sizes.items():
        labels[0, pos : pos + size] = cid
        pos += size
    size_arr = np.zeros(max(sizes) + 1, dtype=np.int64)
    for cid, size in sizes.items():
        size_arr[cid] = size
    return ClusterLabeling(labels=labels, cluster_sizes=size_arr, method="test")


class TestFilterSmallClusters:
    def test_document_example(self):
        lab = handmade_labeling({1: 50, 2: 10})
        out = filter_small_clusters(lab, 30)
        assert out.cluster_sizes[1] == 50
        assert out.cluster_sizes[2] == 0
        assert not (out.labels == 2).any()
        assert (out.labels == 1).sum() == 50

    def test_min_size_one_is_identity(self):
        lab = handmade_labeling({1: 5, 2: 3})
        out = filter_small_clusters(lab, 1)
        np.testing.assert_array_equal(out.labels, lab.labels)

    def test_all_large_enough_is_identity(self):
        lab = handmade_labeling({1: 50, 2: 40})
        out = filter_small_clusters(lab, 30)
        np.testing.assert_array_equal(out.labels, lab.labels)
        np.testing.assert_array_equal(out.cluster_sizes, lab.cluster_sizes)

    def test_surviving_ids_unchanged(self):
        lab = handmade_labeling({1: 2, 2: 50, 3: 1, 4: 40})
        out = filter_small_clusters(lab, 10)
        assert set(np.unique(out.labels)) == {0, 2, 4}
