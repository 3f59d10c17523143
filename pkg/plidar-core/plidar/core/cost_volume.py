""" Classical stereo cost volumes over disparity or depth and their soft-argmax readout """
import logging
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator
from scipy.ndimage import correlate1d
from typing_extensions import Literal

from plidar.core import SETTINGS
from plidar.core.errors import EmptyInputError, GridKindError, ShapeMismatchError
from plidar.core.geometry import (
    CameraCalib,
    DepthMap,
    DisparityMap,
    disparity_to_depth,
)
from plidar.core.utils import GridKind

logger = logging.getLogger(__name__)

# ITU-R 601-2 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class CostVolume(BaseModel):
    """
    Matching scores per pixel and grid level, higher is more likely
    """

    scores: np.ndarray = Field(
        ..., description="Scores, shape (height, width, levels), float32"
    )
    grid: np.ndarray = Field(
        ..., description="Strictly increasing grid values (pixels or meters)"
    )
    kind: GridKind = Field(..., description="Whether the grid is disparity or depth")

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator("scores", pre=True)
    def as_scores(cls, v):
        v = np.asarray(v, dtype=np.float32)
        if v.ndim != 3:
            raise ValueError(f"Cost volumes are 3-D, got shape {v.shape}")
        return v

    @validator("grid", pre=True)
    def as_increasing_grid(cls, v):
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if np.any(np.diff(v) <= 0):
            raise ValueError("Cost volume grid must be strictly increasing")
        return v

    @root_validator(skip_on_failure=True)
    def levels_match_grid(cls, values):
        if values["scores"].shape[2] != len(values["grid"]):
            raise ValueError(
                f"{values['scores'].shape[2]} score levels for a grid of {len(values['grid'])}"
            )
        return values

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]

    @property
    def levels(self) -> int:
        return self.scores.shape[2]

    def argmax(self) -> np.ndarray:
        """Grid value of the best score of every pixel"""
        return self.grid[np.argmax(self.scores, axis=2)]


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """
    Converts an (h, w) or (h, w, 3) image to a float64 grayscale array
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image[..., :3] @ LUMA_WEIGHTS
    if image.ndim != 2:
        raise ShapeMismatchError(f"Expected a grayscale or RGB image, got {image.shape}")
    return image


def default_depth_grid(
    min_depth: float = SETTINGS.MIN_DEPTH,
    max_depth: float = SETTINGS.MAX_DEPTH,
    step: float = SETTINGS.DEPTH_GRID_STEP,
) -> np.ndarray:
    n_levels = int(np.floor((max_depth - min_depth) / step + 1e-9)) + 1
    return min_depth + step * np.arange(n_levels)


def build_disparity_volume(
    left: np.ndarray,
    right: np.ndarray,
    max_disparity: int = SETTINGS.MAX_DISPARITY,
    window: int = SETTINGS.SAD_WINDOW,
    right_shift: int = SETTINGS.STEREO_RIGHT_SHIFT,
) -> CostVolume:
    """
    Builds the disparity score volume of a rectified pair by windowed
    sum-of-absolute-differences block matching

    score(u, v, d) = -SAD between the window centered at (u, v) in the left image and the
    window centered at (u + right_shift * d, v) in the right image. Samples outside the
    image are clamped to the nearest edge pixel

    Args:
        left: left image, grayscale or RGB
        right: right image, same size as left
        max_disparity: largest disparity level; the grid is 0..max_disparity
        window: odd side length of the matching window
        right_shift: -1 when the right camera sits to the right of the left one
    """
    left, right = to_grayscale(left), to_grayscale(right)
    if left.shape != right.shape:
        raise ShapeMismatchError(
            f"Left image {left.shape} and right image {right.shape} differ in size"
        )
    if left.size == 0:
        raise EmptyInputError("Stereo images have no pixels")
    if window < 1 or window % 2 == 0:
        raise ValueError(f"Matching window must be a positive odd size, got {window}")

    height, width = left.shape
    columns = np.arange(width)
    box = np.ones(window)
    scores = np.empty((height, width, max_disparity + 1), dtype=np.float32)

    for d in range(max_disparity + 1):
        shifted = right[:, np.clip(columns + right_shift * d, 0, width - 1)]
        diff = np.abs(left - shifted)
        sad = correlate1d(diff, box, axis=0, mode="nearest")
        sad = correlate1d(sad, box, axis=1, mode="nearest")
        scores[..., d] = -sad

    logger.debug(
        f"Built disparity volume {height}x{width}x{max_disparity + 1} (window {window})"
    )
    return CostVolume(
        scores=scores,
        grid=np.arange(max_disparity + 1, dtype=np.float64),
        kind=GridKind.disparity,
    )


def remap_to_depth_volume(
    disp_vol: CostVolume,
    calib: CameraCalib,
    depth_grid: Optional[Sequence[float]] = None,
) -> CostVolume:
    """
    Resamples a disparity score volume onto a depth grid

    The depth level z reads the disparity scores at d = f_u * b / z by linear
    interpolation along the grid axis; disparities beyond the grid take the
    boundary score. Knot-aligned depths copy the disparity score exactly

    Args:
        disp_vol: disparity-kind volume
        calib: camera calibration
        depth_grid: depth levels in meters, defaults to [MIN_DEPTH, MAX_DEPTH] every
            DEPTH_GRID_STEP
    """
    if disp_vol.kind is not GridKind.disparity:
        raise GridKindError(f"Expected a disparity volume, got a {disp_vol.kind} volume")

    z = default_depth_grid() if depth_grid is None else np.asarray(depth_grid, dtype=np.float64)
    grid = disp_vol.grid
    d = np.clip(calib.focal_baseline / z, grid[0], grid[-1])

    lo = np.clip(np.searchsorted(grid, d, side="right") - 1, 0, len(grid) - 2)
    hi = lo + 1
    t = (d - grid[lo]) / (grid[hi] - grid[lo])

    s_lo = disp_vol.scores[..., lo].astype(np.float64)
    s_hi = disp_vol.scores[..., hi].astype(np.float64)
    blended = np.where(
        t == 0.0, s_lo, np.where(t == 1.0, s_hi, (1.0 - t) * s_lo + t * s_hi)
    )

    return CostVolume(scores=blended, grid=z, kind=GridKind.depth)


def soft_argmax(vol: CostVolume) -> Union[DepthMap, DisparityMap]:
    """
    Softmax-weighted average of the grid values along the grid axis.
    The output kind follows the volume kind
    """
    if vol.levels < 2:
        raise ValueError("Soft-argmax needs at least two grid levels")

    scores = vol.scores.astype(np.float64)
    peak = scores.max(axis=2, keepdims=True)
    weights = np.exp(scores - peak)
    out = (weights @ vol.grid) / weights.sum(axis=2)

    if vol.kind is GridKind.depth:
        return DepthMap.from_array(out)
    return DisparityMap.from_array(out)


def estimate_depth(
    left: np.ndarray,
    right: np.ndarray,
    calib: CameraCalib,
    method: Literal["depth", "disparity"] = "depth",
    max_disparity: int = SETTINGS.MAX_DISPARITY,
    window: int = SETTINGS.SAD_WINDOW,
    depth_grid: Optional[Sequence[float]] = None,
    right_shift: int = SETTINGS.STEREO_RIGHT_SHIFT,
) -> DepthMap:
    """
    Dense stereo depth from a rectified pair

    Args:
        method: "depth" reads out a depth volume remapped from the disparity volume,
            "disparity" reads out disparity and converts it to depth
    """
    disp_vol = build_disparity_volume(
        left, right, max_disparity=max_disparity, window=window, right_shift=right_shift
    )
    if method == "depth":
        return soft_argmax(remap_to_depth_volume(disp_vol, calib, depth_grid))
    elif method == "disparity":
        return disparity_to_depth(soft_argmax(disp_vol), calib)
    raise ValueError(f"Unknown stereo readout method {method}")
