"""
LiDAR scans in the sensor frame, beam sparsification by elevation angle and the
rigid transforms between the LiDAR and camera frames.

LiDAR frame: x forward, y left, z up. Camera frame: x right, y down, z forward.
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from monty.serialization import loadfn
from pydantic import BaseModel, Field, validator

from plidar.core import SETTINGS
from plidar.core.errors import DegenerateGeometryError, ShapeMismatchError
from plidar.core.geometry import CameraCalib, DepthMap, PointCloud, backproject

logger = logging.getLogger(__name__)

_BEAM_PRESETS = loadfn(str(Path(__file__).parent.joinpath("beam_presets.yaml").resolve()))

# LiDAR mounted at the camera center: camera x = -lidar y, camera y = -lidar z, camera z = lidar x
AXIS_PERMUTATION = np.array(
    [[0.0, -1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [1.0, 0.0, 0.0, 0.0]]
)

ALIGNMENT_TOL = 1e-6


class LidarScan(BaseModel):
    """
    Ordered LiDAR returns (x, y, z, reflectance) in the sensor frame
    """

    points: np.ndarray = Field(
        ..., description="Returns, shape (n, 4): forward, left, up in meters and reflectance"
    )

    class Config:
        arbitrary_types_allowed = True

    @validator("points", pre=True)
    def as_returns(cls, v):
        v = np.asarray(v, dtype=np.float64)
        if v.size == 0:
            v = v.reshape(0, 4)
        if v.ndim != 2 or v.shape[1] != 4:
            raise ValueError(f"LiDAR scans have shape (n, 4), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("LiDAR returns must be finite")
        return v

    def __len__(self) -> int:
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def reflectance(self) -> np.ndarray:
        return self.points[:, 3]

    @classmethod
    def from_xyz(cls, xyz: np.ndarray, reflectance: Optional[np.ndarray] = None):
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if reflectance is None:
            reflectance = np.zeros(len(xyz))
        return cls(points=np.column_stack([xyz, reflectance]))


class BeamSelection(BaseModel):
    """
    Elevation bins kept when simulating a sparse LiDAR from a full scan.
    Intervals are half-open [lo, hi) and aligned to the bin grid
    """

    bin_start_deg: float = Field(
        SETTINGS.BEAM_BIN_START, description="Lower edge of bin 0 in degrees"
    )
    bin_step_deg: float = Field(SETTINGS.BEAM_BIN_STEP, description="Bin width in degrees")
    selected_intervals: List[Tuple[float, float]] = Field(
        [], description="Selected [lo, hi) elevation intervals in degrees"
    )

    @validator("bin_step_deg")
    def positive_step(cls, v):
        if not v > 0:
            raise ValueError(f"Bin step must be positive, got {v}")
        return v

    @validator("selected_intervals")
    def aligned_and_disjoint(cls, v, values):
        if "bin_start_deg" not in values or "bin_step_deg" not in values:
            return v
        start, step = values["bin_start_deg"], values["bin_step_deg"]

        for lo, hi in v:
            if not hi > lo:
                raise ValueError(f"Empty beam interval [{lo}, {hi})")
            for edge in (lo, hi):
                offset = (edge - start) / step
                if abs(offset - round(offset)) > ALIGNMENT_TOL:
                    raise ValueError(f"Interval edge {edge} is not on the {step} degree bin grid")

        ordered = sorted(v)
        for (_, hi), (lo, _) in zip(ordered, ordered[1:]):
            if lo < hi - ALIGNMENT_TOL * step:
                raise ValueError(f"Beam intervals overlap at {lo} degrees")
        return v

    @classmethod
    def from_preset(cls, name: str) -> "BeamSelection":
        """
        Named selection from the packaged presets: "2", "4" or "64"
        """
        name = str(name)
        if name not in _BEAM_PRESETS:
            raise ValueError(
                f"Unknown beam preset {name}, expected one of {sorted(_BEAM_PRESETS)}"
            )
        intervals = [tuple(i) for i in _BEAM_PRESETS[name]["intervals"]]
        return cls(selected_intervals=intervals)

    @staticmethod
    def preset_names() -> List[str]:
        return sorted(_BEAM_PRESETS, key=int)

    def bins(self) -> np.ndarray:
        """Sorted indices of every selected bin"""
        index = [
            np.arange(self._bin_of_edge(lo), self._bin_of_edge(hi))
            for lo, hi in self.selected_intervals
        ]
        if not index:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(index)).astype(np.int64)

    def bin_centers(self) -> np.ndarray:
        return self.bin_start_deg + (self.bins() + 0.5) * self.bin_step_deg

    def contains(self, theta_deg: np.ndarray, snap: float = SETTINGS.BEAM_SNAP) -> np.ndarray:
        """
        Whether each elevation angle falls into a selected interval [lo, hi). Angles
        within `snap` degrees below an edge count as on it
        """
        theta = np.asarray(theta_deg, dtype=np.float64)
        inside = np.zeros(theta.shape, dtype=bool)
        for lo, hi in self.selected_intervals:
            inside |= (theta >= lo - snap) & (theta < hi - snap)
        return inside

    def _bin_of_edge(self, edge: float) -> int:
        return int(round((edge - self.bin_start_deg) / self.bin_step_deg))


def elevation_angle(point) -> np.ndarray:
    """
    Signed elevation above the sensor's horizontal plane in degrees, positive up.
    Accepts one (x, y, z[, r]) point or an (n, 3|4) array of them

    Raises:
        DegenerateGeometryError: if a point sits at the sensor origin
    """
    point = np.asarray(point, dtype=np.float64)
    x, y, z = point[..., 0], point[..., 1], point[..., 2]
    horizontal = np.hypot(x, y)
    if np.any((horizontal == 0) & (z == 0)):
        raise DegenerateGeometryError("Elevation angle is undefined at the sensor origin")
    return np.degrees(np.arctan2(z, horizontal))


def beam_index(
    theta_deg,
    bin_start_deg: float = SETTINGS.BEAM_BIN_START,
    bin_step_deg: float = SETTINGS.BEAM_BIN_STEP,
    snap: float = SETTINGS.BEAM_SNAP,
) -> np.ndarray:
    """
    Elevation bin of each angle. Angles within `snap` degrees below a bin's lower
    edge belong to that bin
    """
    offset = np.asarray(theta_deg, dtype=np.float64) - bin_start_deg + snap
    return np.floor(offset / bin_step_deg).astype(np.int64)


def sparsify(scan: LidarScan, selection: BeamSelection) -> LidarScan:
    """
    Keeps the returns whose elevation angle falls into a selected interval,
    preserving order and reflectance. Returns at the sensor origin belong to no beam
    """
    if len(scan) == 0 or not selection.selected_intervals:
        return LidarScan(points=scan.points[:0])

    at_origin = np.all(scan.xyz == 0, axis=1)
    if at_origin.any():
        logger.debug(f"Skipping {int(at_origin.sum())} returns at the sensor origin")

    keep = np.zeros(len(scan), dtype=bool)
    keep[~at_origin] = selection.contains(elevation_angle(scan.xyz[~at_origin]))
    return LidarScan(points=scan.points[keep])


def check_extrinsics(extrinsics: np.ndarray, tol: float = 1e-3) -> np.ndarray:
    """
    Returns the extrinsics as a 3x4 float array after checking the rotation block
    is orthonormal and proper
    """
    extrinsics = np.asarray(extrinsics, dtype=np.float64)
    if extrinsics.shape == (4, 4):
        extrinsics = extrinsics[:3]
    if extrinsics.shape != (3, 4):
        raise ShapeMismatchError(f"Extrinsics must be 3x4, got {extrinsics.shape}")
    rotation = extrinsics[:, :3]
    if not np.allclose(rotation @ rotation.T, np.eye(3), atol=tol) or not np.isclose(
        np.linalg.det(rotation), 1.0, atol=tol
    ):
        raise ValueError("Extrinsics rotation block is not a proper rotation")
    return extrinsics


def lidar_to_camera(scan: LidarScan, extrinsics: np.ndarray = AXIS_PERMUTATION) -> PointCloud:
    """
    Moves LiDAR returns into the camera frame (p_cam = R p + t) and drops the
    returns behind the camera
    """
    extrinsics = check_extrinsics(extrinsics)
    rotation, translation = extrinsics[:, :3], extrinsics[:, 3]
    xyz = scan.xyz @ rotation.T + translation
    in_front = xyz[:, 2] > 0
    n_behind = int((~in_front).sum())
    if n_behind:
        logger.debug(f"Dropped {n_behind} LiDAR returns behind the camera")
    return PointCloud(xyz=xyz[in_front])


def camera_to_lidar(
    cloud: PointCloud,
    extrinsics: np.ndarray = AXIS_PERMUTATION,
    reflectance: Optional[np.ndarray] = None,
) -> LidarScan:
    """
    Moves camera-frame points into the LiDAR frame (p = R^T (p_cam - t)).
    Reflectance defaults to zero
    """
    extrinsics = check_extrinsics(extrinsics)
    rotation, translation = extrinsics[:, :3], extrinsics[:, 3]
    return LidarScan.from_xyz((cloud.xyz - translation) @ rotation, reflectance)


def pseudo_lidar_scan(
    z_map: DepthMap, calib: CameraCalib, extrinsics: np.ndarray = AXIS_PERMUTATION
) -> LidarScan:
    """
    Pseudo-LiDAR: the back-projected depth map expressed as a LiDAR scan
    """
    return camera_to_lidar(backproject(z_map, calib), extrinsics)
