"""Slope-based per-ray ground classification.

Each azimuth column is treated as one ray fan. Walking its returns from the
lowest ring upward, a return stays ground while the slope to the previous
valid return is shallow and its height stays below a ceiling tied to the
sensor mount height; the first break makes everything above it non-ground.
O(rows * cols), no iteration, no plane fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInputError
from .rangeimage import RangeImage


@dataclass(frozen=True)
class GroundParams:
    """Thresholds for the per-ray walk.

    ``max_ground_height`` defaults to ``height_margin - sensor_height``: the
    sensor sits at z = 0, so flat ground lies near z = -sensor_height and
    anything more than ``height_margin`` above it cannot be ground.
    """

    max_slope_deg: float = 10.0
    sensor_height: float = 1.73
    height_margin: float = 0.5
    max_ground_height: float | None = None

    def __post_init__(self):
        if not 0 < self.max_slope_deg < 90:
            raise InvalidInputError("max_slope_deg must be in (0, 90)")

    @property
    def height_ceiling(self) -> float:
        if self.max_ground_height is not None:
            return self.max_ground_height
        return self.height_margin - self.sensor_height


@dataclass
class GroundMask:
    """Per-pixel ground flags aligned with a RangeImage; never true at holes."""

    mask: np.ndarray

    def __post_init__(self):
        self.mask.setflags(write=False)

    @property
    def num_ground(self) -> int:
        return int(np.count_nonzero(self.mask))


def classify_ground(img: RangeImage, params: GroundParams | None = None) -> GroundMask:
    """Classify ground returns column by column.

    An empty image yields an all-false mask. Pure function of its inputs;
    columns are independent.
    """
    if params is None:
        params = GroundParams()
    mask = _kernels.ground_walk(
        img.depth,
        img.pts,
        np.deg2rad(params.max_slope_deg),
        params.height_ceiling,
    )
    return GroundMask(mask=mask)
