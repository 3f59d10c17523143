"""
Synthetic scenes with exact ground truth: textured fronto-parallel rectangles and
an optional ground plane rendered into a rectified stereo pair, a true depth map
and a ray-cast 64-beam LiDAR scan
"""
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator
from scipy.ndimage import zoom

from plidar.core import SETTINGS
from plidar.core.geometry import CameraCalib, DepthMap
from plidar.core.kitti import (
    KittiCalib,
    SceneFiles,
    write_calib,
    write_depth_png,
    write_image,
    write_velodyne,
)
from plidar.core.lidar import AXIS_PERMUTATION, BeamSelection, LidarScan
from plidar.core.utils import NoiseGrowth

logger = logging.getLogger(__name__)

SKY = -1
SKY_INTENSITY = 0.0
TEXTURE_CELL = 4
LIDAR_AZIMUTH_STEP = 0.2
NOISE_REF_DEPTH = 10.0


def desk_calib(width: int = 320, height: int = 96) -> CameraCalib:
    """Default camera of synthetic scenes, principal point at the image center"""
    return CameraCalib(
        f_u=SETTINGS.SYNTH_DEFAULTS["f_u"],
        f_v=SETTINGS.SYNTH_DEFAULTS["f_v"],
        c_u=width / 2,
        c_v=height / 2,
        baseline_m=SETTINGS.SYNTH_DEFAULTS["baseline_m"],
    )


class PlaneObject(BaseModel):
    """
    Fronto-parallel textured rectangle in the camera frame
    """

    x: float = Field(0.0, description="Center, meters right of the optical axis")
    y: float = Field(0.0, description="Center, meters below the optical axis")
    z: float = Field(..., description="Depth in meters")
    width: float = Field(..., description="Width in meters")
    height: float = Field(..., description="Height in meters")
    texture_seed: int = Field(0, description="Seed of the procedural texture")
    textured: bool = Field(True, description="False renders a constant intensity")
    depth_bias: float = Field(0.0, description="Corruption bias added to its depths, meters")

    @validator("width", "height")
    def positive_size(cls, v):
        if not v > 0:
            raise ValueError(f"Object sizes must be positive, got {v}")
        return v


class GroundPlane(BaseModel):
    """
    Horizontal plane camera_height meters below the camera
    """

    camera_height: float = Field(
        SETTINGS.SYNTH_DEFAULTS["camera_height"], description="Meters below the camera"
    )
    max_depth: float = Field(
        SETTINGS.MAX_DEPTH, description="Ground beyond this depth is sky"
    )
    texture_seed: int = Field(0, description="Seed of the procedural texture")
    depth_bias: float = Field(0.0, description="Corruption bias added to its depths, meters")


class SceneSpec(BaseModel):
    """
    Geometry, camera, corruption and seed of a synthetic scene.
    The seed determines every rendered and corrupted value
    """

    width: int = Field(320, description="Image width in pixels")
    height: int = Field(96, description="Image height in pixels")
    calib: CameraCalib = Field(default_factory=desk_calib, description="Camera calibration")
    objects: List[PlaneObject] = Field([], description="Fronto-parallel rectangles")
    ground: Optional[GroundPlane] = Field(None, description="Ground plane, if any")
    max_disparity: int = Field(
        64, description="Largest disparity any surface may have, pixels"
    )
    noise_sigma: float = Field(
        0.0, description="Per-pixel Gaussian corruption at the reference depth, meters"
    )
    noise_growth: NoiseGrowth = Field(
        NoiseGrowth.constant, description="How the corruption noise grows with depth"
    )
    noise_ref_depth: float = Field(
        NOISE_REF_DEPTH, description="Depth at which quadratic noise equals noise_sigma"
    )
    seed: int = Field(0, description="Seed of textures and corruption")

    @root_validator(skip_on_failure=True)
    def objects_in_range(cls, values):
        calib = values["calib"]
        for obj in values["objects"]:
            if not SETTINGS.MIN_DEPTH <= obj.z <= SETTINGS.MAX_DEPTH:
                raise ValueError(f"Object depth {obj.z} is outside the valid depth range")
            if calib.focal_baseline / obj.z > values["max_disparity"]:
                raise ValueError(f"Object at {obj.z} m exceeds the maximum disparity")
        if not values["objects"] and values["ground"] is None:
            values["ground"] = GroundPlane()
        return values

    @property
    def surfaces(self) -> list:
        """Objects followed by the ground; labels index into this list"""
        return list(self.objects) + ([self.ground] if self.ground is not None else [])


class SceneRender(BaseModel):
    """
    Everything rendered from a SceneSpec
    """

    left: np.ndarray = Field(..., description="Left image, integer intensities 0-255")
    right: np.ndarray = Field(..., description="Right image, integer intensities 0-255")
    depth: DepthMap = Field(..., description="True depth of the left image")
    labels: np.ndarray = Field(
        ..., description="Surface index of every left pixel, -1 for sky"
    )
    scan: LidarScan = Field(..., description="Ray-cast 64-beam LiDAR scan")
    scan_labels: np.ndarray = Field(..., description="Surface index of every LiDAR return")

    class Config:
        arbitrary_types_allowed = True


def _texture(seed, height: int, width: int, textured: bool) -> np.ndarray:
    """Value noise blended with white noise, rounded to integer intensities"""
    if not textured:
        return np.full((height, width), 128.0)
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0, 1, (height // TEXTURE_CELL + 2, width // TEXTURE_CELL + 2))
    smooth = zoom(coarse, TEXTURE_CELL, order=1)[:height, :width]
    fine = rng.uniform(0, 1, (height, width))
    return np.round(20 + 215 * (0.5 * smooth + 0.5 * fine))


def _ground_depth(spec: SceneSpec, ground: GroundPlane, rows: np.ndarray) -> np.ndarray:
    """Depth of the ground seen along each row, inf where the row sees no ground"""
    below = rows - spec.calib.c_v
    with np.errstate(divide="ignore"):
        z = np.where(below > 0, spec.calib.f_v * ground.camera_height / below, np.inf)
    return np.where((z >= SETTINGS.MIN_DEPTH) & (z <= ground.max_depth), z, np.inf)


def _surface_depths(spec: SceneSpec, shift: int) -> np.ndarray:
    """
    Depth of every surface covering every pixel (inf elsewhere), shape
    (surfaces, height, width). shift is 1 for the right view, where a surface
    moves by its disparity, and 0 for the left view
    """
    calib = spec.calib
    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    depths = np.full((len(spec.surfaces), spec.height, spec.width), np.inf)

    for s, surface in enumerate(spec.surfaces):
        if isinstance(surface, GroundPlane):
            # the row alone fixes the ground depth, in either view
            depths[s] = _ground_depth(spec, surface, rows)
            continue
        u = cols + shift * calib.focal_baseline / surface.z
        u0 = calib.f_u * (surface.x - surface.width / 2) / surface.z + calib.c_u
        u1 = calib.f_u * (surface.x + surface.width / 2) / surface.z + calib.c_u
        v0 = calib.f_v * (surface.y - surface.height / 2) / surface.z + calib.c_v
        v1 = calib.f_v * (surface.y + surface.height / 2) / surface.z + calib.c_v
        covered = (u >= u0) & (u < u1) & (rows >= v0) & (rows < v1)
        depths[s][covered] = surface.z
    return depths


def _frontmost(depths: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(depths).any(axis=0), np.argmin(depths, axis=0), SKY)


def render(spec: SceneSpec) -> SceneRender:
    """
    Renders the stereo pair, true depth, surface labels and LiDAR scan of a scene

    A left pixel shows the frontmost surface covering it. The right camera sits
    baseline_m to the right, so a surface of disparity d seen at right column u_r
    shows its texture at left column round(u_r + d)
    """
    calib = spec.calib
    n_surfaces = len(spec.surfaces)
    texture_width = spec.width + spec.max_disparity + 2
    textures = [
        _texture(
            [spec.seed, s, surface.texture_seed],
            spec.height,
            texture_width,
            getattr(surface, "textured", True),
        )
        for s, surface in enumerate(spec.surfaces)
    ]

    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]

    left_depths = _surface_depths(spec, 0)
    labels = _frontmost(left_depths)
    true_z = left_depths.min(axis=0)

    right_depths = _surface_depths(spec, 1)
    right_labels = _frontmost(right_depths)

    left = np.full(labels.shape, SKY_INTENSITY)
    right = np.full(labels.shape, SKY_INTENSITY)
    for s in range(n_surfaces):
        on_left = labels == s
        left[on_left] = textures[s][rows[on_left], cols[on_left]]

        on_right = right_labels == s
        d = calib.focal_baseline / right_depths[s][on_right]
        source = np.floor(cols[on_right] + d + 0.5).astype(np.int64)
        right[on_right] = textures[s][rows[on_right], np.minimum(source, texture_width - 1)]

    depth = DepthMap.from_array(np.where(np.isfinite(true_z), true_z, 0.0))
    scan, scan_labels = cast_lidar(spec)
    logger.debug(
        f"Rendered {spec.width}x{spec.height} scene with {n_surfaces} surfaces,"
        f" {depth.n_valid} valid pixels and {len(scan)} LiDAR returns"
    )
    return SceneRender(
        left=left,
        right=right,
        depth=depth,
        labels=labels,
        scan=scan,
        scan_labels=scan_labels,
    )


def cast_lidar(spec: SceneSpec, azimuth_step: float = LIDAR_AZIMUTH_STEP):
    """
    Casts rays at the center elevation of all 64 beam bins over the camera's
    horizontal field of view, from a LiDAR at the camera center

    Returns:
        the scan in the LiDAR frame and the surface index of every return
    """
    calib = spec.calib
    elevations = np.radians(BeamSelection.from_preset("64").bin_centers())
    half_fov = np.degrees(np.arctan(max(calib.c_u, spec.width - calib.c_u) / calib.f_u)) + 1.0
    azimuths = np.radians(np.arange(-half_fov, half_fov + azimuth_step / 2, azimuth_step))
    theta, phi = (a.ravel() for a in np.meshgrid(elevations, azimuths, indexing="ij"))

    lidar_dirs = np.stack(
        [np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), np.sin(theta)], axis=1
    )
    dirs = lidar_dirs @ AXIS_PERMUTATION[:, :3].T

    hits = np.full((len(spec.surfaces), len(dirs)), np.inf)
    for s, surface in enumerate(spec.surfaces):
        if isinstance(surface, GroundPlane):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(dirs[:, 1] > 0, surface.camera_height / dirs[:, 1], np.inf)
            z = t * dirs[:, 2]
            ok = (z >= SETTINGS.MIN_DEPTH) & (z <= surface.max_depth)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(dirs[:, 2] > 0, surface.z / dirs[:, 2], np.inf)
            x, y = t * dirs[:, 0], t * dirs[:, 1]
            ok = (
                np.isfinite(t)
                & (x >= surface.x - surface.width / 2)
                & (x < surface.x + surface.width / 2)
                & (y >= surface.y - surface.height / 2)
                & (y < surface.y + surface.height / 2)
            )
        hits[s] = np.where(ok, t, np.inf)

    nearest = hits.min(axis=0)
    hit = np.isfinite(nearest)
    labels = np.argmin(hits, axis=0)[hit]
    xyz = nearest[hit, None] * lidar_dirs[hit]
    reflectance = np.where(labels == len(spec.objects), 0.3, 0.8)
    return LidarScan.from_xyz(xyz, reflectance), labels


def _noise_scale(spec: SceneSpec, z: np.ndarray) -> np.ndarray:
    if spec.noise_growth is NoiseGrowth.quadratic:
        return (z / spec.noise_ref_depth) ** 2
    return np.ones_like(z)


def corrupt(true_depth: DepthMap, labels: np.ndarray, spec: SceneSpec) -> DepthMap:
    """
    Stereo-like corruption: each surface's depth_bias plus seeded Gaussian noise
    of noise_sigma, scaled by the growth law at the true depth
    """
    bias = np.zeros(true_depth.shape)
    for s, surface in enumerate(spec.surfaces):
        bias[labels == s] = surface.depth_bias

    z = true_depth.values
    corrupted = z + bias
    if spec.noise_sigma > 0:
        rng = np.random.default_rng([spec.seed, len(spec.surfaces)])
        corrupted = corrupted + rng.normal(0.0, spec.noise_sigma, z.shape) * _noise_scale(
            spec, z
        )
    return DepthMap.from_array(
        np.where(true_depth.valid_mask, corrupted, 0.0), valid_mask=true_depth.valid_mask
    )


def save_scene(
    root: Union[str, Path],
    spec: SceneSpec,
    scene: SceneRender,
    stereo_depth: Optional[DepthMap] = None,
    frame_id: str = "000000",
):
    """
    Writes a rendered scene as a KITTI-like scene directory
    """
    files = SceneFiles(root=Path(root), frame_id=frame_id)
    files.make_dirs()
    write_image(files.left_image, scene.left)
    write_image(files.right_image, scene.right)
    write_depth_png(files.true_depth, scene.depth)
    write_depth_png(
        files.stereo_depth,
        stereo_depth if stereo_depth is not None else corrupt(scene.depth, scene.labels, spec),
    )
    write_velodyne(files.velodyne, scene.scan)
    write_calib(files.calib, KittiCalib.from_camera(spec.calib, AXIS_PERMUTATION))
    return files
