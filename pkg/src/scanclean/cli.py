"""Command-line surface.

Every report-producing command writes delimited output (CSV/JSON) plus a
rendered PNG figure next to it (suppress with --no-figures). Thresholds come
from the shipped defaults, a --config file, and --set overrides, in that
order.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from pathlib import Path

import click
import numpy as np

from .clustering import DepthClusterParams, EuclideanClusterParams, depth_cluster, euclidean_cluster
from .config import PipelineConfig, apply_override, default_config, dump_config, load_config
from .degeneration import (
    DegenerationReport,
    degeneration_degree,
    extract_normal_field,
    map_threshold,
)
from .errors import ScanCleanError
from .evaluate import LabeledBox, cluster_box_iou, rmse, rpe
from .fileio import (
    ScanFile,
    read_kitti_poses,
    write_kitti_bin,
    write_labeled_cloud,
    write_pcd,
)
from .ground import classify_ground
from .pipeline import FrameError, process_frame, process_sequence
from .rangeimage import PointCloud, project
from .skeleton import extract_skeleton
from .synthetic import SyntheticSceneSpec, generate_scene


def _load_cloud(path) -> PointCloud:
    return ScanFile.from_path(path).load()


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class _Ctx:
    def __init__(self, config: PipelineConfig, figures: bool):
        self.config = config
        self.figures = figures


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="INI config file; defaults are built in.")
@click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
              help="Override one config value (repeatable).")
@click.option("--seed", type=int, default=None, help="Shortcut for normal_field.rng_seed.")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render PNG figures next to delimited outputs.")
@click.version_option(package_name="scanclean")
@click.pass_context
def main(ctx, config_path, overrides, seed, figures):
    """Ambient-aware LiDAR scan cleaning and evaluation."""
    try:
        cfg = load_config(config_path) if config_path else default_config()
        for spec in overrides:
            cfg = apply_override(cfg, spec)
        if seed is not None:
            cfg = cfg.with_seed(seed)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    ctx.obj = _Ctx(cfg, figures)


@main.command("show-config")
@click.pass_obj
def show_config(obj):
    """Print the effective configuration."""
    click.echo(dump_config(obj.config), nl=False)


@main.command("gen-scene")
@click.option("--kind", type=click.Choice(["corridor", "room", "wall-pair", "clutter"]),
              required=True)
@click.option("--out", "out_prefix", required=True, type=click.Path(),
              help="Output prefix; writes <out>.bin, <out>.truth.json, <out>.labels.npy.")
@click.option("--noise", type=float, default=0.0, show_default=True, help="Range noise sigma [m].")
@click.option("--scene-seed", type=int, default=0, show_default=True)
@click.option("--n-boxes", type=int, default=5, show_default=True)
@click.option("--no-ground", is_flag=True, help="Skip the ground plane.")
@click.pass_obj
def gen_scene(obj, kind, out_prefix, noise, scene_seed, n_boxes, no_ground):
    """Ray-cast a synthetic scene with exact ground truth."""
    spec = SyntheticSceneSpec(
        kind=kind,
        sensor=obj.config.sensor,
        noise_sigma=noise,
        seed=scene_seed,
        n_boxes=n_boxes,
        ground=not no_ground,
        sensor_height=obj.config.ground.sensor_height,
    )
    try:
        scene = generate_scene(spec)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_kitti_bin(scene.cloud, f"{prefix}.bin")
    np.save(f"{prefix}.labels.npy", scene.object_ids)
    _write_json(f"{prefix}.truth.json", {
        "kind": kind,
        "noise_sigma": noise,
        "seed": scene_seed,
        "boxes": [b.to_dict() for b in scene.boxes],
        "box_object_ids": scene.box_object_ids,
        "ground_plane": scene.ground_plane,
        "ground_object_id": scene.ground_object_id,
        "num_points": len(scene.cloud),
    })
    click.echo(f"{kind}: {len(scene.cloud)} points, {len(scene.boxes)} boxes -> {prefix}.bin")


@main.command("project")
@click.option("--cloud", "cloud_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.pass_obj
def project_cmd(obj, cloud_path, out_prefix):
    """Project a scan to a range image and report occupancy."""
    cloud = _load_cloud(cloud_path)
    try:
        img = project(cloud, obj.config.sensor)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    cols = img.cols
    forward = np.r_[0 : cols // 4, 3 * cols // 4 : cols]
    fwd_occ = float(img.valid[:, forward].mean())
    stats = {
        "points": len(cloud),
        "valid_pixels": img.num_valid,
        "occupancy": img.num_valid / (img.rows * img.cols),
        "forward_occupancy": fwd_occ,
    }
    _write_json(f"{prefix}.stats.json", stats)
    if obj.figures:
        from . import plots

        plots.save_depth_image(img.depth, f"{prefix}.depth.png")
    click.echo(
        f"projected {len(cloud)} points -> {img.num_valid} pixels "
        f"({100 * stats['occupancy']:.1f}% occupancy)"
    )


def _cluster_once(obj, cloud_path, method, beta0, gamma, eps, window):
    cloud = _load_cloud(cloud_path)
    cfg = obj.config
    img = project(cloud, cfg.sensor)
    ground = classify_ground(img, cfg.ground)
    if method == "depth":
        labeling = depth_cluster(img, ground, DepthClusterParams(beta0))
    elif method == "euclid":
        params = EuclideanClusterParams(gamma=gamma, window=window)
        labeling = euclidean_cluster(img, ground, params)
    else:  # euclid-fixed
        params = EuclideanClusterParams(window=window, fixed_eps=eps)
        labeling = euclidean_cluster(img, ground, params)
    return cloud, img, ground, labeling


@main.command("cluster")
@click.option("--cloud", "cloud_path", required=True, type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["depth", "euclid", "euclid-fixed"]),
              default="euclid", show_default=True)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.option("--beta0", type=float, default=None,
              help="Depth-clustering angle threshold [deg]; default from config.")
@click.option("--gamma", type=float, default=None, help="Adaptive redundancy factor.")
@click.option("--eps", type=float, default=0.75, show_default=True,
              help="Fixed distance threshold [m] for euclid-fixed.")
@click.option("--window", type=int, default=None, help="Search window half-width.")
@click.pass_obj
def cluster_cmd(obj, cloud_path, method, out_prefix, beta0, gamma, eps, window):
    """Ground-filter and cluster one scan; write labels, sizes, and a figure."""
    cfg = obj.config
    beta0 = cfg.depth.beta0_deg if beta0 is None else beta0
    gamma = cfg.euclid.gamma if gamma is None else gamma
    window = cfg.euclid.window if window is None else window
    try:
        cloud, img, ground, labeling = _cluster_once(
            obj, cloud_path, method, beta0, gamma, eps, window
        )
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    labeled = labeling.labels > 0
    xyz = np.stack([img.x[labeled], img.y[labeled], img.z[labeled]], axis=1)
    write_pcd(f"{prefix}.pcd", xyz, labeling.labels[labeled] + 1)
    sizes = [(int(i), int(s)) for i, s in enumerate(labeling.cluster_sizes) if i > 0 and s > 0]
    _write_csv(f"{prefix}.sizes.csv", ["cluster_id", "size"], sizes)
    _write_json(f"{prefix}.summary.json", {
        "method": labeling.method,
        "params": labeling.params,
        "clusters": len(sizes),
        "labeled_points": labeling.num_labeled,
        "ground_points": ground.num_ground,
    })
    if obj.figures:
        from . import plots

        plots.save_label_image(labeling.labels, f"{prefix}.labels.png",
                               title=f"{labeling.method} clusters")
    click.echo(f"{labeling.method}: {len(sizes)} clusters over {labeling.num_labeled} points")


@main.command("skeleton")
@click.option("--cloud", "cloud_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.pass_obj
def skeleton_cmd(obj, cloud_path, out_prefix):
    """Extract the structural skeleton of one scan."""
    cfg = obj.config
    cloud = _load_cloud(cloud_path)
    try:
        img = project(cloud, cfg.sensor)
        ground = classify_ground(img, cfg.ground)
        dep = depth_cluster(img, ground, DepthClusterParams(cfg.first_pass_beta0))
        euc = euclidean_cluster(img, ground, cfg.euclid)
        skel = extract_skeleton(euc, dep, cfg.skeleton.n_e, cfg.skeleton.n_d)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    m = skel.mask
    xyz = np.stack([img.x[m], img.y[m], img.z[m]], axis=1)
    write_pcd(f"{prefix}.pcd", xyz, np.full(len(xyz), 2, dtype=np.int64))
    _write_json(f"{prefix}.summary.json", {
        "skeleton_points": skel.count,
        "valid_pixels": img.num_valid,
        "ground_points": ground.num_ground,
    })
    if obj.figures:
        from . import plots

        plots.save_mask_image(m, f"{prefix}.mask.png", title="skeleton mask")
    click.echo(f"skeleton: {skel.count} of {img.num_valid} valid pixels")


def _sequence_paths(directory) -> list[Path]:
    paths = sorted(Path(directory).glob("*.bin"))
    if not paths:
        raise click.ClickException(f"no .bin scans found in {directory}")
    return paths


@main.command("degen")
@click.option("--cloud", "cloud_path", type=click.Path(exists=True), default=None)
@click.option("--dir", "seq_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.pass_obj
def degen_cmd(obj, cloud_path, seq_dir, out_prefix):
    """Score scene degeneration for one scan or a scan directory."""
    if (cloud_path is None) == (seq_dir is None):
        raise click.ClickException("pass exactly one of --cloud or --dir")
    cfg = obj.config
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)

    def frame_report(cloud, fid):
        img = project(cloud, cfg.sensor)
        ground = classify_ground(img, cfg.ground)
        dep = depth_cluster(img, ground, DepthClusterParams(cfg.first_pass_beta0))
        euc = euclidean_cluster(img, ground, cfg.euclid)
        skel = extract_skeleton(euc, dep, cfg.skeleton.n_e, cfg.skeleton.n_d)
        field = extract_normal_field(img, skel, cfg.normals)
        try:
            report = degeneration_degree(field, cfg.degen.min_features)
        except ScanCleanError:
            report = DegenerationReport(k=math.inf, mu=1.0, principal_direction=None,
                                        num_features=len(field))
        report.beta0_dynamic = map_threshold(report.mu, cfg.degen.beta0_min, cfg.degen.beta0_max)
        report.frame_id = fid
        return report

    try:
        if cloud_path is not None:
            report = frame_report(_load_cloud(cloud_path), 0)
            _write_json(f"{prefix}.report.json", report.to_dict())
            click.echo(f"mu={report.mu:.3f} k={report.k:.3f} "
                       f"beta0={report.beta0_dynamic:.1f} features={report.num_features}")
            return
        reports = []
        with open(f"{prefix}.reports.jsonl", "w", encoding="utf-8") as fh:
            for fid, path in enumerate(_sequence_paths(seq_dir)):
                report = frame_report(_load_cloud(path), fid)
                fh.write(json.dumps(report.to_dict()) + "\n")
                reports.append(report)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    _write_csv(f"{prefix}.mu.csv", ["frame", "mu", "beta0_dynamic", "num_features"],
               [(r.frame_id, r.mu, r.beta0_dynamic, r.num_features) for r in reports])
    if obj.figures:
        from . import plots

        plots.save_mu_trace([r.frame_id for r in reports], [r.mu for r in reports],
                            f"{prefix}.mu.png", beta0s=[r.beta0_dynamic for r in reports])
    click.echo(f"{len(reports)} frames -> {prefix}.mu.csv")


@main.command("filter")
@click.option("--cloud", "cloud_path", type=click.Path(exists=True), default=None)
@click.option("--dir", "seq_dir", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_obj
def filter_cmd(obj, cloud_path, seq_dir, out_dir, workers):
    """Run the full adaptive pipeline; write cleaned clouds and reports."""
    if (cloud_path is None) == (seq_dir is None):
        raise click.ClickException("pass exactly one of --cloud or --dir")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [Path(cloud_path)] if cloud_path else _sequence_paths(seq_dir)
    clouds = (_load_cloud(p) for p in paths)

    reports = []
    timing_rows = []
    n_errors = 0
    with open(out / "reports.jsonl", "w", encoding="utf-8") as fh:
        for result in process_sequence(clouds, obj.config, workers=workers):
            if isinstance(result, FrameError):
                n_errors += 1
                fh.write(json.dumps({"frame_id": result.frame_id,
                                     "error": str(result.error)}) + "\n")
                click.echo(f"frame {result.frame_id}: ERROR {result.error}", err=True)
                continue
            write_labeled_cloud(result, out / f"frame_{result.frame_id:06d}.pcd")
            fh.write(json.dumps(result.report.to_dict()) + "\n")
            reports.append(result.report)
            timing_rows.append(
                (result.frame_id,) + tuple(1e3 * result.timings[k] for k in _STAGES)
            )
    _write_csv(out / "timings.csv", ("frame",) + _STAGES, timing_rows)
    if reports:
        _write_csv(out / "mu.csv", ["frame", "mu", "beta0_dynamic", "num_features"],
                   [(r.frame_id, r.mu, r.beta0_dynamic, r.num_features) for r in reports])
        if obj.figures:
            from . import plots

            plots.save_mu_trace([r.frame_id for r in reports], [r.mu for r in reports],
                                out / "mu.png", beta0s=[r.beta0_dynamic for r in reports])
    click.echo(f"{len(reports)} frames cleaned, {n_errors} errors -> {out}")


_STAGES = ("project", "ground", "depth_cluster", "euclidean_cluster", "skeleton",
           "degeneration", "depth_recluster", "small_filter", "total")


@main.command("eval-iou")
@click.option("--scene", "scene_prefix", required=True, type=click.Path(),
              help="Prefix written by gen-scene.")
@click.option("--method", type=click.Choice(["depth", "euclid", "euclid-fixed"]),
              default="euclid", show_default=True)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.option("--beta0", type=float, default=None,
              help="Depth threshold [deg]; default from config.")
@click.option("--eps", type=float, default=0.75, show_default=True)
@click.pass_obj
def eval_iou_cmd(obj, scene_prefix, method, out_prefix, beta0, eps):
    """Cluster a generated scene and score clusters against its truth boxes."""
    cfg = obj.config
    beta0 = cfg.depth.beta0_deg if beta0 is None else beta0
    truth = json.loads(Path(f"{scene_prefix}.truth.json").read_text())
    boxes = [LabeledBox.from_dict(b) for b in truth["boxes"]]
    if not boxes:
        raise click.ClickException("scene has no ground-truth boxes")
    try:
        cloud, img, ground, labeling = _cluster_once(
            obj, f"{scene_prefix}.bin", method, beta0, cfg.euclid.gamma, eps, cfg.euclid.window
        )
        result = cluster_box_iou(labeling, img, boxes, ground=ground)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(f"{prefix}.boxes.csv", ["tag", "iou", "best_cluster", "box_points"],
               [(b.tag, b.iou, b.best_cluster, b.box_points) for b in result.per_box])
    _write_json(f"{prefix}.summary.json", {
        "method": labeling.method,
        "mean_iou": result.mean_iou,
        "fraction_iou_ge_0.5": result.fraction_above_half,
        "evaluated_boxes": len(result.per_box),
        "skipped_boxes": result.skipped,
    })
    if obj.figures and result.per_box:
        from . import plots

        plots.save_iou_hist([b.iou for b in result.per_box], f"{prefix}.iou.png")
    click.echo(f"{labeling.method}: mean IoU {result.mean_iou:.3f} "
               f"over {len(result.per_box)} boxes ({result.skipped} skipped)")


@main.command("eval-rpe")
@click.option("--est", "est_path", required=True, type=click.Path(exists=True))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True))
@click.option("--delta", type=int, default=1, show_default=True, help="Frame offset.")
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.option("--rotation", is_flag=True, help="Also report rotational RMSE.")
@click.pass_obj
def eval_rpe_cmd(obj, est_path, gt_path, delta, out_prefix, rotation):
    """Relative pose error between two KITTI-format trajectories."""
    try:
        est = read_kitti_poses(est_path)
        gt = read_kitti_poses(gt_path)
        result = rpe(est, gt, delta=delta)
    except ScanCleanError as exc:
        raise click.ClickException(str(exc))
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        (i, float(t), float(np.degrees(r)))
        for i, (t, r) in enumerate(zip(result.translational, result.rotational_rad))
    ]
    _write_csv(f"{prefix}.rpe.csv", ["frame", "trans_m", "rot_deg"], rows)
    summary = {
        "delta": delta,
        "frames": len(result.translational),
        "rmse_trans_m": rmse(result.translational),
    }
    if rotation:
        summary["rmse_rot_deg"] = rmse(np.degrees(result.rotational_rad))
    _write_json(f"{prefix}.summary.json", summary)
    if obj.figures:
        from . import plots

        plots.save_rpe_plot(result.translational, f"{prefix}.rpe.png",
                            rot_errors=result.rotational_rad if rotation else None)
    click.echo(f"RPE over {summary['frames']} frames: rmse {summary['rmse_trans_m']:.4f} m")


@main.command("bench")
@click.option("--frames", type=int, default=20, show_default=True)
@click.option("--kind", type=click.Choice(["corridor", "room", "wall-pair", "clutter"]),
              default="room", show_default=True)
@click.option("--n-boxes", type=int, default=12, show_default=True)
@click.option("--out", "out_prefix", required=True, type=click.Path())
@click.pass_obj
def bench_cmd(obj, frames, kind, n_boxes, out_prefix):
    """Time the pipeline stages over repeated runs of one synthetic frame."""
    cfg = obj.config
    spec = SyntheticSceneSpec(kind=kind, sensor=cfg.sensor, noise_sigma=0.02, seed=1,
                              n_boxes=n_boxes, sensor_height=cfg.ground.sensor_height)
    scene = generate_scene(spec)
    process_frame(scene.cloud, cfg)  # warm the compiled kernels
    samples: dict[str, list[float]] = {k: [] for k in _STAGES}
    for _ in range(frames):
        result = process_frame(scene.cloud, cfg)
        for k in _STAGES:
            samples[k].append(1e3 * result.timings[k])
    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    p50 = {k: statistics.median(v) for k, v in samples.items()}
    p95 = {k: float(np.percentile(v, 95)) for k, v in samples.items()}
    _write_csv(f"{prefix}.latency.csv", ["stage", "p50_ms", "p95_ms"],
               [(k, f"{p50[k]:.3f}", f"{p95[k]:.3f}") for k in _STAGES])
    if obj.figures:
        from . import plots

        plots.save_latency_bars(list(_STAGES), [p50[k] for k in _STAGES],
                                [p95[k] for k in _STAGES], f"{prefix}.latency.png")
    click.echo(f"{'stage':<18}{'p50 ms':>10}{'p95 ms':>10}")
    for k in _STAGES:
        click.echo(f"{k:<18}{p50[k]:>10.2f}{p95[k]:>10.2f}")


if __name__ == "__main__":
    main()
