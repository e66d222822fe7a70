"""Pipeline configuration: one flat INI file, one section per stage.

Every threshold the pipeline uses lives here with its shipped default; the
CLI loads a file with ``--config`` and applies ``--set section.key=value``
overrides on top. ``data/default.cfg`` mirrors the dataclass defaults and is
what ``default_config()`` describes.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .clustering import DepthClusterParams, EuclideanClusterParams
from .degeneration import NormalFieldParams
from .errors import InvalidInputError
from .ground import GroundParams
from .rangeimage import SensorModel


@dataclass(frozen=True)
class SkeletonParams:
    """Small-cluster cutoffs: n_e keeps large objects, n_d keeps surfaces."""

    n_e: int = 100
    n_d: int = 30

    def __post_init__(self):
        if self.n_e < 1 or self.n_d < 1:
            raise InvalidInputError("cluster size thresholds must be >= 1")


@dataclass(frozen=True)
class DegenParams:
    """Threshold range for the adaptive re-clustering pass."""

    beta0_min: float = 10.0
    beta0_max: float = 60.0
    min_features: int = 10

    def __post_init__(self):
        if not 0 < self.beta0_min < self.beta0_max < 90:
            raise InvalidInputError("need 0 < beta0_min < beta0_max < 90")
        if self.min_features < 1:
            raise InvalidInputError("min_features must be >= 1")


@dataclass(frozen=True)
class PipelineConfig:
    sensor: SensorModel = field(default_factory=SensorModel.hdl64)
    ground: GroundParams = field(default_factory=GroundParams)
    # standalone depth-clustering threshold (the pipeline's own passes use
    # first_pass_beta0 and the degeneration-mapped value instead)
    depth: DepthClusterParams = field(default_factory=DepthClusterParams)
    euclid: EuclideanClusterParams = field(default_factory=EuclideanClusterParams)
    skeleton: SkeletonParams = field(default_factory=SkeletonParams)
    normals: NormalFieldParams = field(default_factory=NormalFieldParams)
    degen: DegenParams = field(default_factory=DegenParams)
    # First depth pass threshold; None means "use beta0_min" (lenient, so the
    # skeleton sees the fullest structure).
    initial_beta0: float | None = None

    @property
    def first_pass_beta0(self) -> float:
        return self.initial_beta0 if self.initial_beta0 is not None else self.degen.beta0_min

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, normals=replace(self.normals, rng_seed=seed))


def default_config() -> PipelineConfig:
    return PipelineConfig()


def _sensor_from_section(sec) -> SensorModel:
    angles_raw = sec.get("vertical_angles", "").strip()
    num_rings = sec.getint("num_rings")
    if angles_raw:
        angles = np.array([float(v) for v in angles_raw.split(",")])
    else:
        angles = np.linspace(sec.getfloat("elev_top"), sec.getfloat("elev_bottom"), num_rings)
    return SensorModel(
        num_rings=num_rings,
        num_cols=sec.getint("num_cols"),
        vertical_angles=angles,
        max_range=sec.getfloat("max_range"),
        min_range=sec.getfloat("min_range"),
    )


def parse_config(text: str) -> PipelineConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    try:
        sensor = _sensor_from_section(cp["sensor"])
        g = cp["ground"]
        ground = GroundParams(
            max_slope_deg=g.getfloat("max_slope_deg"),
            sensor_height=g.getfloat("sensor_height"),
            height_margin=g.getfloat("height_margin"),
        )
        depth = DepthClusterParams(beta0_deg=cp["depth_cluster"].getfloat("beta0"))
        e = cp["euclidean_cluster"]
        fixed = e.get("fixed_eps", "").strip()
        euclid = EuclideanClusterParams(
            gamma=e.getfloat("gamma"),
            window=e.getint("window"),
            fixed_eps=float(fixed) if fixed else None,
        )
        s = cp["skeleton"]
        skel = SkeletonParams(n_e=s.getint("n_e"), n_d=s.getint("n_d"))
        n = cp["normal_field"]
        normals = NormalFieldParams(
            sample_fraction=n.getfloat("sample_fraction"),
            window=n.getint("window"),
            depth_gate=n.getfloat("depth_gate"),
            min_neighbors=n.getint("min_neighbors"),
            rng_seed=n.getint("rng_seed"),
        )
        d = cp["degeneration"]
        degen = DegenParams(
            beta0_min=d.getfloat("beta0_min"),
            beta0_max=d.getfloat("beta0_max"),
            min_features=d.getint("min_features"),
        )
        p = cp["pipeline"]
        initial = p.get("initial_beta0", "").strip()
        return PipelineConfig(
            sensor=sensor,
            ground=ground,
            depth=depth,
            euclid=euclid,
            skeleton=skel,
            normals=normals,
            degen=degen,
            initial_beta0=float(initial) if initial else None,
        )
    except (KeyError, configparser.Error, ValueError) as exc:
        raise InvalidInputError(f"bad config: {exc}") from exc


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: PipelineConfig) -> str:
    cp = configparser.ConfigParser()
    angles = cfg.sensor.vertical_angles
    uniform = np.allclose(angles, np.linspace(angles[0], angles[-1], len(angles)))
    sensor_sec = {
        "num_rings": str(cfg.sensor.num_rings),
        "num_cols": str(cfg.sensor.num_cols),
        "max_range": repr(cfg.sensor.max_range),
        "min_range": repr(cfg.sensor.min_range),
    }
    if uniform:
        sensor_sec["elev_top"] = repr(float(angles[0]))
        sensor_sec["elev_bottom"] = repr(float(angles[-1]))
    else:
        sensor_sec["vertical_angles"] = ",".join(repr(float(a)) for a in angles)
    cp["sensor"] = sensor_sec
    cp["ground"] = {
        "max_slope_deg": repr(cfg.ground.max_slope_deg),
        "sensor_height": repr(cfg.ground.sensor_height),
        "height_margin": repr(cfg.ground.height_margin),
    }
    cp["depth_cluster"] = {"beta0": repr(cfg.depth.beta0_deg)}
    cp["euclidean_cluster"] = {
        "gamma": repr(cfg.euclid.gamma),
        "window": str(cfg.euclid.window),
        "fixed_eps": "" if cfg.euclid.fixed_eps is None else repr(cfg.euclid.fixed_eps),
    }
    cp["skeleton"] = {"n_e": str(cfg.skeleton.n_e), "n_d": str(cfg.skeleton.n_d)}
    cp["normal_field"] = {
        "sample_fraction": repr(cfg.normals.sample_fraction),
        "window": str(cfg.normals.window),
        "depth_gate": repr(cfg.normals.depth_gate),
        "min_neighbors": str(cfg.normals.min_neighbors),
        "rng_seed": str(cfg.normals.rng_seed),
    }
    cp["degeneration"] = {
        "beta0_min": repr(cfg.degen.beta0_min),
        "beta0_max": repr(cfg.degen.beta0_max),
        "min_features": str(cfg.degen.min_features),
    }
    cp["pipeline"] = {
        "initial_beta0": "" if cfg.initial_beta0 is None else repr(cfg.initial_beta0),
    }
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def apply_override(cfg: PipelineConfig, spec: str) -> PipelineConfig:
    """Apply one ``section.key=value`` override on top of a config."""
    try:
        target, value = spec.split("=", 1)
        section, key = target.strip().split(".", 1)
    except ValueError as exc:
        raise InvalidInputError(f"override must look like section.key=value: {spec!r}") from exc
    text = dump_config(cfg)
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if section not in cp or key not in cp[section]:
        if section not in cp:
            raise InvalidInputError(f"unknown config section {section!r}")
        raise InvalidInputError(f"unknown key {key!r} in section {section!r}")
    cp[section][key] = value.strip()
    buf = io.StringIO()
    cp.write(buf)
    return parse_config(buf.getvalue())
