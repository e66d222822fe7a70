"""Ambient-aware LiDAR scan cleaning.

Range-image clustering (angle-criterion and adaptive-distance), skeleton
extraction, normal-field degeneration scoring, and a closed-loop pipeline
that re-clusters each frame at a degeneration-mapped threshold; plus IoU and
trajectory-error evaluation tools.
"""

from .clustering import (
    ClusterLabeling,
    DepthClusterParams,
    EuclideanClusterParams,
    adaptive_threshold,
    beta,
    depth_cluster,
    euclidean_cluster,
    filter_small_clusters,
)
from .config import DegenParams, PipelineConfig, SkeletonParams, default_config, load_config
from .degeneration import (
    DegenerationReport,
    NormalFeature,
    NormalFeatureField,
    NormalFieldParams,
    degeneration_degree,
    extract_normal_field,
    map_threshold,
    neighborhood_set,
    normal_weight,
    pca_normal,
)
from .errors import (
    DegenerateNeighborhoodError,
    EmptyInputError,
    EmptyProjectionError,
    FormatError,
    InsufficientFeaturesError,
    InvalidDepthError,
    InvalidInputError,
    InvalidSceneError,
    LengthMismatchError,
    ScanCleanError,
    ShapeMismatchError,
    TooFewPointsError,
    ZeroSeparationError,
)
from .evaluate import LabeledBox, Trajectory, cluster_box_iou, rmse, rpe
from .ground import GroundMask, GroundParams, classify_ground
from .pipeline import FrameError, FrameResult, process_frame, process_sequence
from .rangeimage import (
    PixelCoord,
    Point,
    PointCloud,
    RangeImage,
    SensorModel,
    beam_angle,
    neighbors,
    project,
    unproject,
)
from .skeleton import SkeletonMask, extract_skeleton
from .synthetic import SceneTruth, SyntheticSceneSpec, generate_scene

__version__ = "0.1.0"
