"""
KITTI-style file formats: calibration text files, velodyne binaries, 16-bit depth
PNGs, 8-bit images, the raw cost volume dump and the scene directory layout
"""
import logging
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel, Field, validator

from plidar.core import SETTINGS
from plidar.core.cost_volume import CostVolume
from plidar.core.errors import CalibrationFormatError, EmptyInputError
from plidar.core.geometry import CameraCalib, DepthMap
from plidar.core.lidar import AXIS_PERMUTATION, LidarScan
from plidar.core.utils import GridKind

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CALIB_SHAPES = {
    "P0": (3, 4),
    "P1": (3, 4),
    "P2": (3, 4),
    "P3": (3, 4),
    "R0_rect": (3, 3),
    "Tr_velo_to_cam": (3, 4),
    "Tr_imu_to_velo": (3, 4),
}

VOLUME_KIND_TAGS = {GridKind.disparity: 0, GridKind.depth: 1}


class KittiCalib(BaseModel):
    """
    Projection matrices of the rectified color cameras and the LiDAR-to-camera transform
    """

    P2: np.ndarray = Field(..., description="Left color camera projection, 3x4")
    P3: np.ndarray = Field(..., description="Right color camera projection, 3x4")
    R0_rect: np.ndarray = Field(
        np.eye(3), description="Rectifying rotation of the reference camera, 3x3"
    )
    Tr_velo_to_cam: Optional[np.ndarray] = Field(
        None, description="Velodyne to reference camera transform, 3x4"
    )

    class Config:
        arbitrary_types_allowed = True

    @validator("P2", "P3", "Tr_velo_to_cam", pre=True)
    def as_3x4(cls, v):
        return None if v is None else np.asarray(v, dtype=np.float64).reshape(3, 4)

    @validator("R0_rect", pre=True)
    def as_3x3(cls, v):
        return np.asarray(v, dtype=np.float64).reshape(3, 3)

    @property
    def camera(self) -> CameraCalib:
        return CameraCalib.from_projections(self.P2, self.P3)

    @property
    def extrinsics(self) -> np.ndarray:
        """
        3x4 transform from the velodyne frame to the left color camera frame
        """
        if self.Tr_velo_to_cam is None:
            raise CalibrationFormatError("Calibration has no Tr_velo_to_cam entry")
        rotation = self.R0_rect @ self.Tr_velo_to_cam[:, :3]
        # P2 = K [I | t2]
        offset = np.linalg.solve(self.camera.intrinsic_matrix(), self.P2[:, 3])
        translation = self.R0_rect @ self.Tr_velo_to_cam[:, 3] + offset
        return np.column_stack([rotation, translation])

    @classmethod
    def from_camera(
        cls, calib: CameraCalib, extrinsics: np.ndarray = AXIS_PERMUTATION
    ) -> "KittiCalib":
        """
        Calibration of an ideal rig: the left camera at the reference origin,
        the right camera baseline_m to its right
        """
        K = calib.intrinsic_matrix()
        P2 = np.column_stack([K, np.zeros(3)])
        P3 = P2.copy()
        P3[0, 3] = -calib.focal_baseline
        return cls(P2=P2, P3=P3, R0_rect=np.eye(3), Tr_velo_to_cam=extrinsics)


def parse_calib_lines(lines) -> Dict[str, np.ndarray]:
    raw = {}
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise CalibrationFormatError(f"Line {number} is not a 'key: values' entry")
        key, value = line.split(":", 1)
        try:
            raw[key.strip()] = np.array([float(x) for x in value.split()])
        except ValueError:
            raise CalibrationFormatError(f"Non-numeric value in calibration entry {key}")
    return raw


def read_calib(path: PathLike) -> KittiCalib:
    """
    Reads a KITTI object-format calibration file

    Raises:
        CalibrationFormatError: missing P2/P3 or entries of the wrong size
    """
    with open(path) as f:
        raw = parse_calib_lines(f)

    for key in ("P2", "P3"):
        if key not in raw:
            raise CalibrationFormatError(f"{path} has no {key} entry")
    for key, shape in CALIB_SHAPES.items():
        if key in raw and raw[key].size != np.prod(shape):
            raise CalibrationFormatError(
                f"{key} has {raw[key].size} values, expected {int(np.prod(shape))}"
            )

    return KittiCalib(
        P2=raw["P2"],
        P3=raw["P3"],
        R0_rect=raw.get("R0_rect", np.eye(3)),
        Tr_velo_to_cam=raw.get("Tr_velo_to_cam"),
    )


def write_calib(path: PathLike, calib: KittiCalib):
    entries = {
        "P0": calib.P2,
        "P1": calib.P3,
        "P2": calib.P2,
        "P3": calib.P3,
        "R0_rect": calib.R0_rect,
    }
    if calib.Tr_velo_to_cam is not None:
        entries["Tr_velo_to_cam"] = calib.Tr_velo_to_cam

    with open(path, "w") as f:
        for key, matrix in entries.items():
            f.write(f"{key}: " + " ".join(f"{x:.17g}" for x in matrix.ravel()) + "\n")


def read_velodyne(path: PathLike) -> LidarScan:
    """
    Reads a headerless little-endian float32 (x, y, z, reflectance) binary
    """
    data = np.fromfile(str(path), dtype="<f4")
    if data.size % 4:
        raise EmptyInputError(f"{path} does not hold whole (x, y, z, r) records")
    return LidarScan(points=data.reshape(-1, 4))


def write_velodyne(path: PathLike, scan: LidarScan):
    scan.points.astype("<f4").tofile(str(path))


def read_depth_png(path: PathLike, scale: float = SETTINGS.DEPTH_PNG_SCALE) -> DepthMap:
    """
    Reads a 16-bit depth PNG: depth = pixel / scale, 0 marks invalid pixels
    """
    with Image.open(path) as image:
        raw = np.array(image).astype(np.float64)
    return DepthMap.from_array(raw / scale, valid_mask=raw > 0)


def write_depth_png(path: PathLike, z_map: DepthMap, scale: float = SETTINGS.DEPTH_PNG_SCALE):
    """
    Writes a 16-bit depth PNG. Valid depths round to the nearest step of 1 / scale
    meters and never to 0
    """
    raw = np.clip(np.round(z_map.values * scale), 1, np.iinfo(np.uint16).max)
    raw = np.where(z_map.valid_mask, raw, 0).astype(np.uint16)
    Image.fromarray(raw).save(path)


def read_image(path: PathLike) -> np.ndarray:
    """
    Reads an 8-bit image as grayscale float64 (ITU-R 601-2 luma)
    """
    with Image.open(path) as image:
        return np.asarray(image.convert("L"), dtype=np.float64)


def write_image(path: PathLike, image: np.ndarray):
    pixels = np.clip(np.round(image), 0, 255).astype(np.uint8)
    Image.fromarray(pixels).save(path)


def dump_volume(path: PathLike, vol: CostVolume):
    """
    Raw volume dump: a 16-byte header of little-endian u32 (width, height, levels,
    kind tag) then the float32 scores in (v, u, level) order
    """
    header = np.array(
        [vol.width, vol.height, vol.levels, VOLUME_KIND_TAGS[vol.kind]], dtype="<u4"
    )
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(vol.scores.astype("<f4").tobytes())


def load_volume(path: PathLike, grid: np.ndarray) -> CostVolume:
    """
    Reads a volume dump; the grid values are not part of the dump
    """
    with open(path, "rb") as f:
        width, height, levels, tag = np.frombuffer(f.read(16), dtype="<u4")
        scores = np.frombuffer(f.read(), dtype="<f4").reshape(height, width, levels)
    kind = {t: k for k, t in VOLUME_KIND_TAGS.items()}[int(tag)]
    return CostVolume(scores=scores, grid=grid, kind=kind)


class SceneFiles(BaseModel):
    """
    File locations of one frame in a KITTI-like scene directory
    """

    root: Path = Field(..., description="Scene directory")
    frame_id: str = Field("000000", description="Zero padded frame identifier")

    @property
    def left_image(self) -> Path:
        return self.root / "image_2" / f"{self.frame_id}.png"

    @property
    def right_image(self) -> Path:
        return self.root / "image_3" / f"{self.frame_id}.png"

    @property
    def true_depth(self) -> Path:
        return self.root / "depth_2" / f"{self.frame_id}.png"

    @property
    def stereo_depth(self) -> Path:
        return self.root / "stereo_2" / f"{self.frame_id}.png"

    @property
    def velodyne(self) -> Path:
        return self.root / "velodyne" / f"{self.frame_id}.bin"

    @property
    def calib(self) -> Path:
        return self.root / "calib" / f"{self.frame_id}.txt"

    def make_dirs(self):
        for path in (
            self.left_image,
            self.right_image,
            self.true_depth,
            self.stereo_depth,
            self.velodyne,
            self.calib,
        ):
            path.parent.mkdir(parents=True, exist_ok=True)
