"""
This file defines the global numerical defaults used across the plidar
packages, to ensure the stereo, LiDAR and correction stages agree on
grids, clamps and tolerances.
"""
import json
from typing import Dict, List

import requests
from pydantic import BaseSettings, Field, root_validator, validator
from pydantic.types import Path

DEFAULT_CONFIG_FILE_PATH = str(Path.home().joinpath(".plidar.json"))


class PlidarSettings(BaseSettings):
    """
    Settings for the plidar- packages
    The default way to modify these is to modify ~/.plidar.json or set the environment variable
    PLIDAR_CONFIG_FILE to point to the json with plidar settings
    """

    config_file: str = Field(
        DEFAULT_CONFIG_FILE_PATH, description="File to load alternative defaults from"
    )

    MIN_DEPTH: float = Field(
        1.0, description="Smallest valid depth in meters; nearer pixels are invalid"
    )
    MAX_DEPTH: float = Field(
        80.0, description="Largest valid depth in meters; farther pixels are invalid"
    )
    DEPTH_GRID_STEP: float = Field(
        1.0, description="Spacing of the depth cost volume grid in meters"
    )

    MAX_DISPARITY: int = Field(
        191, description="Largest disparity level of the disparity cost volume"
    )
    SAD_WINDOW: int = Field(
        9, description="Side of the square block matching window in pixels (odd)"
    )
    STEREO_RIGHT_SHIFT: int = Field(
        -1,
        description="Direction of the matched right-image column: u + STEREO_RIGHT_SHIFT * d."
        " -1 for a physical rectified pair with the right camera to the right",
    )

    KNN_K: int = Field(10, description="Neighborhood size of the KNN graph")
    KNN_QUERY_SLACK: int = Field(
        4,
        description="Extra neighbors queried from the KD-tree to resolve distance ties"
        " without a radius search",
    )
    WEIGHT_REGULARIZATION: float = Field(
        1e-6,
        description="Relative L2 regularization of the reconstruction weights, scaled by the"
        " trace of each neighborhood's centered depth Gram matrix",
    )

    GDC_TOL: float = Field(
        1e-8, description="Relative residual tolerance of the correction solve"
    )
    GDC_MAX_ITER_FACTOR: int = Field(
        10, description="Iteration limit of the correction solve per free point"
    )

    BEAM_BIN_START: float = Field(
        -23.6, description="Lower edge of the first elevation bin in degrees"
    )
    BEAM_BIN_STEP: float = Field(0.4, description="Elevation bin width in degrees")
    BEAM_SNAP: float = Field(
        1e-12,
        description="Degrees below a beam bin edge within which an elevation angle still"
        " counts as on the edge, absorbing floating point roundoff",
    )
    DEFAULT_BEAMS: str = Field(
        "4", description="Beam preset used when none is requested"
    )

    ERROR_BIN_EDGES: List[float] = Field(
        [float(e) for e in range(0, 75, 5)],
        description="Truth depth bin edges in meters for binned error reports",
    )
    SMOOTH_L1_BETA: float = Field(
        1.0, description="Transition point of the smooth L1 loss"
    )

    DEPTH_PNG_SCALE: float = Field(
        256.0, description="Depth PNG pixel value per meter"
    )

    SYNTH_DEFAULTS: Dict[str, float] = Field(
        {"f_u": 180.0, "f_v": 180.0, "baseline_m": 0.54, "camera_height": 1.65},
        description="Camera defaults for synthetic scenes at desk scale",
    )

    class Config:
        env_prefix = "plidar_"
        extra = "ignore"

    @root_validator(pre=True)
    def load_default_settings(cls, values):
        """
        Loads settings from a root file if available and uses that as defaults in
        place of built in defaults
        """
        config_file_path: str = values.get("config_file", DEFAULT_CONFIG_FILE_PATH)

        new_values = {}

        if config_file_path.startswith("http"):
            new_values = requests.get(config_file_path).json()
        elif Path(config_file_path).exists():
            with open(config_file_path) as f:
                new_values = json.load(f)

        new_values.update(values)

        return new_values

    @validator("SAD_WINDOW")
    def window_is_odd(cls, v):
        if v < 1 or v % 2 == 0:
            raise ValueError(f"SAD_WINDOW must be a positive odd integer, got {v}")
        return v

    @validator("STEREO_RIGHT_SHIFT")
    def shift_is_unit(cls, v):
        if v not in (-1, 1):
            raise ValueError(f"STEREO_RIGHT_SHIFT must be -1 or 1, got {v}")
        return v

    @validator("MAX_DEPTH")
    def depth_range_ordered(cls, v, values):
        if "MIN_DEPTH" in values and v <= values["MIN_DEPTH"]:
            raise ValueError("MAX_DEPTH must exceed MIN_DEPTH")
        return v
