from dataclasses import replace

import numpy as np
import pytest

from scanclean import (
    DegenParams,
    EmptyInputError,
    FrameError,
    PointCloud,
    SyntheticSceneSpec,
    default_config,
    generate_scene,
    process_frame,
    process_sequence,
)

from conftest import ORACLE_SENSOR


def oracle_config(**kw):
    cfg = replace(default_config(), sensor=ORACLE_SENSOR, **kw)
    return cfg


def corridor_cloud(seed=2, noise=0.02):
    spec = SyntheticSceneSpec(
        kind="corridor", sensor=ORACLE_SENSOR, noise_sigma=noise, seed=seed, ground=False
    )
    return generate_scene(spec).cloud


def room_cloud(seed=0, noise=0.01):
    spec = SyntheticSceneSpec(
        kind="room", sensor=ORACLE_SENSOR, noise_sigma=noise, seed=seed, n_boxes=16, ground=True
    )
    return generate_scene(spec).cloud


class TestProcessFrame:
    def test_corridor_reports_high_degeneration(self):
        result = process_frame(corridor_cloud(), oracle_config())
        assert result.report.mu >= 0.8
        assert result.report.beta0_dynamic <= 10.0 + 5.0  # within 5 deg of the floor

    def test_cluttered_room_reports_low_degeneration(self):
        result = process_frame(room_cloud(), oracle_config())
        assert result.report.mu <= 0.3
        assert result.report.beta0_dynamic >= 60.0 - 10.0  # within 10 deg of the ceiling

    def test_empty_cloud_propagates(self):
        with pytest.raises(EmptyInputError):
            process_frame(PointCloud.from_xyz(np.zeros((0, 3))), oracle_config())

    def test_result_invariants(self):
        cfg = oracle_config()
        result = process_frame(room_cloud(), cfg)
        img = result.image
        # cleaned points are valid, non-ground range-image points
        assert len(result.cleaned_indices) == (result.final.labels > 0).sum()
        cleaned_px = result.final.labels > 0
        assert not (cleaned_px & result.ground.mask).any()
        assert not (cleaned_px & ~img.valid).any()
        # the dynamic threshold drove the final pass
        assert result.final.params["beta0_deg"] == result.report.beta0_dynamic
        assert cfg.degen.beta0_min <= result.report.beta0_dynamic <= cfg.degen.beta0_max
        # bookkeeping adds up
        assert (
            result.removed_count
            == img.num_valid - result.ground.num_ground - len(result.cleaned_indices)
        )
        assert result.unprojected_count == len(result.cloud) - img.num_valid
        for key in ("project", "ground", "depth_cluster", "euclidean_cluster",
                    "skeleton", "degeneration", "depth_recluster", "small_filter", "total"):
            assert key in result.timings

    def test_deterministic(self):
        cfg = oracle_config()
        cloud = room_cloud()
        a = process_frame(cloud, cfg)
        b = process_frame(cloud, cfg)
        np.testing.assert_array_equal(a.final.labels, b.final.labels)
        assert a.report.mu == b.report.mu
        np.testing.assert_array_equal(a.cleaned_indices, b.cleaned_indices)

    def test_cleaned_cloud_monotone_in_threshold(self):
        # pin the degeneration range to force each threshold
        lenient = oracle_config(degen=DegenParams(beta0_min=9.999, beta0_max=10.001))
        strict = oracle_config(degen=DegenParams(beta0_min=59.999, beta0_max=60.001))
        for seed in (0, 3, 5):
            cloud = room_cloud(seed=seed)
            kept_lenient = set(process_frame(cloud, lenient).cleaned_indices.tolist())
            kept_strict = set(process_frame(cloud, strict).cleaned_indices.tolist())
            assert kept_strict <= kept_lenient

    def test_sparse_frame_falls_back_to_lenient_floor(self):
        # a frame too sparse to analyze: a handful of isolated points
        rng = np.random.default_rng(0)
        pts = rng.uniform(-30, 30, (40, 3))
        pts[:, 2] = rng.uniform(-1.0, 2.0, 40)
        result = process_frame(PointCloud.from_xyz(pts), oracle_config())
        assert result.report.mu == 1.0
        assert result.report.beta0_dynamic == pytest.approx(10.0)

    def test_first_pass_threshold_override(self):
        cfg = oracle_config(initial_beta0=25.0)
        result = process_frame(room_cloud(), cfg)
        assert result.first_depth.params["beta0_deg"] == 25.0


class TestProcessSequence:
    def test_identical_frames_identical_results(self):
        cfg = oracle_config()
        cloud = room_cloud()
        results = list(process_sequence([cloud, cloud, cloud], cfg))
        assert [r.frame_id for r in results] == [0, 1, 2]
        for r in results[1:]:
            np.testing.assert_array_equal(r.final.labels, results[0].final.labels)
            assert r.report.mu == results[0].report.mu

    def test_corrupt_frame_reported_inline(self):
        cfg = oracle_config()
        empty = PointCloud.from_xyz(np.zeros((0, 3)))
        results = list(process_sequence([room_cloud(), empty, corridor_cloud()], cfg))
        assert len(results) == 3
        assert isinstance(results[1], FrameError)
        assert results[1].frame_id == 1
        assert isinstance(results[1].error, EmptyInputError)
        assert not isinstance(results[0], FrameError)
        assert not isinstance(results[2], FrameError)

    def test_workers_preserve_order_and_results(self):
        cfg = oracle_config()
        clouds = [room_cloud(seed=s) for s in (0, 1, 2, 3)]
        seq = list(process_sequence(clouds, cfg, workers=1))
        par = list(process_sequence(clouds, cfg, workers=2))
        assert [r.frame_id for r in par] == [0, 1, 2, 3]
        for a, b in zip(seq, par):
            np.testing.assert_array_equal(a.final.labels, b.final.labels)
            assert a.report.mu == b.report.mu

    def test_start_frame_offset(self):
        cfg = oracle_config()
        results = list(process_sequence([room_cloud()], cfg, start_frame=10))
        assert results[0].frame_id == 10
        assert results[0].report.frame_id == 10
