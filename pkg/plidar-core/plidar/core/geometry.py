""" Camera model, depth/disparity maps and pseudo-LiDAR point clouds """
import logging
from typing import Optional, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from plidar.core import SETTINGS
from plidar.core.errors import EmptyInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class CameraCalib(BaseModel):
    """
    Intrinsics of the left camera of a rectified stereo pair and the pair's baseline.
    Camera frame: x right, y down, z forward
    """

    f_u: float = Field(..., description="Horizontal focal length in pixels")
    f_v: float = Field(..., description="Vertical focal length in pixels")
    c_u: float = Field(..., description="Principal point column in pixels")
    c_v: float = Field(..., description="Principal point row in pixels")
    baseline_m: float = Field(..., description="Stereo baseline in meters")

    @validator("f_u", "f_v", "baseline_m")
    def strictly_positive(cls, v, field):
        if not v > 0:
            raise ValueError(f"{field.name} must be positive, got {v}")
        return v

    @property
    def focal_baseline(self) -> float:
        """f_u * b, the disparity of a point at one meter"""
        return self.f_u * self.baseline_m

    @classmethod
    def from_projections(cls, P2: np.ndarray, P3: np.ndarray) -> "CameraCalib":
        """
        Recovers intrinsics and baseline from the 3x4 projection matrices of the
        left (P2) and right (P3) rectified cameras

        Args:
            P2: left camera projection matrix
            P3: right camera projection matrix
        """
        P2 = np.asarray(P2, dtype=np.float64).reshape(3, 4)
        P3 = np.asarray(P3, dtype=np.float64).reshape(3, 4)
        f_u = P2[0, 0]
        return cls(
            f_u=f_u,
            f_v=P2[1, 1],
            c_u=P2[0, 2],
            c_v=P2[1, 2],
            baseline_m=(P2[0, 3] - P3[0, 3]) / f_u,
        )

    def intrinsic_matrix(self) -> np.ndarray:
        return np.array(
            [[self.f_u, 0.0, self.c_u], [0.0, self.f_v, self.c_v], [0.0, 0.0, 1.0]]
        )


M = TypeVar("M", bound="PixelMap")


class PixelMap(BaseModel):
    """
    Dense per-pixel grid of values with a validity mask.
    Invalid pixels hold 0 and are excluded from every reduction
    """

    values: np.ndarray = Field(..., description="Per-pixel values, shape (height, width)")
    valid_mask: np.ndarray = Field(
        ..., description="Per-pixel validity, shape (height, width)"
    )

    class Config:
        arbitrary_types_allowed = True

    @validator("values", pre=True)
    def as_float_grid(cls, v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"Pixel maps are 2-D, got shape {v.shape}")
        return v

    @validator("valid_mask", pre=True)
    def as_bool_grid(cls, v):
        return np.asarray(v, dtype=bool)

    @root_validator(skip_on_failure=True)
    def valid_entries_positive(cls, values):
        vals, mask = values["values"], values["valid_mask"]
        if vals.shape != mask.shape:
            raise ValueError(
                f"values {vals.shape} and valid_mask {mask.shape} must share a shape"
            )
        if not np.all(vals[mask] > 0):
            raise ValueError(f"Every valid entry of a {cls.__name__} must be positive")
        return values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def n_valid(self) -> int:
        return int(self.valid_mask.sum())

    @classmethod
    def from_array(cls: Type[M], values: np.ndarray, valid_mask=None) -> M:
        """
        Wraps a raw array; without a mask, finite strictly positive entries are valid
        """
        values = np.asarray(values, dtype=np.float64)
        finite_positive = np.isfinite(values) & (values > 0)
        mask = (
            finite_positive
            if valid_mask is None
            else np.asarray(valid_mask, dtype=bool) & finite_positive
        )
        return cls(values=np.where(mask, values, 0.0), valid_mask=mask)


class DepthMap(PixelMap):
    """
    Per-pixel depth z in meters. The valid pixels form the set of pixels with a value
    """


class DisparityMap(PixelMap):
    """
    Per-pixel disparity d in pixels. Zero disparity (infinite depth) is never valid
    """


class Point3(BaseModel):
    """
    A single camera-frame point
    """

    x: float = Field(..., description="Meters to the right of the optical axis")
    y: float = Field(..., description="Meters below the optical axis")
    z: float = Field(..., description="Meters along the optical axis")
    source_pixel: Optional[Tuple[int, int]] = Field(
        None, description="(u, v) pixel this point was back-projected from"
    )


class PointCloud(BaseModel):
    """
    Ordered camera-frame points, optionally tagged with their source pixel
    and landmark flag
    """

    xyz: np.ndarray = Field(..., description="Point coordinates, shape (n, 3), meters")
    source_pixels: Optional[np.ndarray] = Field(
        None, description="(u, v) source pixel of every point, shape (n, 2)"
    )
    landmark: Optional[np.ndarray] = Field(
        None, description="Whether each point carries an exact LiDAR depth"
    )

    class Config:
        arbitrary_types_allowed = True

    @validator("xyz", pre=True)
    def as_points(cls, v):
        v = np.asarray(v, dtype=np.float64)
        if v.size == 0:
            v = v.reshape(0, 3)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"Point clouds have shape (n, 3), got {v.shape}")
        return v

    @validator("source_pixels", pre=True)
    def as_pixels(cls, v):
        if v is None:
            return v
        return np.asarray(v, dtype=np.int64).reshape(-1, 2)

    @validator("landmark", pre=True)
    def as_flags(cls, v):
        if v is None:
            return v
        return np.asarray(v, dtype=bool).reshape(-1)

    @root_validator(skip_on_failure=True)
    def tags_match_points(cls, values):
        n = len(values["xyz"])
        for key in ("source_pixels", "landmark"):
            tag = values.get(key)
            if tag is not None and len(tag) != n:
                raise ValueError(f"{key} has {len(tag)} entries for {n} points")
        return values

    def __len__(self) -> int:
        return len(self.xyz)

    @property
    def depths(self) -> np.ndarray:
        return self.xyz[:, 2]

    def point(self, i: int) -> Point3:
        x, y, z = self.xyz[i]
        pixel = None
        if self.source_pixels is not None:
            pixel = tuple(int(p) for p in self.source_pixels[i])
        return Point3(x=x, y=y, z=z, source_pixel=pixel)

    def subset(self, index) -> "PointCloud":
        return PointCloud(
            xyz=self.xyz[index],
            source_pixels=None
            if self.source_pixels is None
            else self.source_pixels[index],
            landmark=None if self.landmark is None else self.landmark[index],
        )


class Projection(BaseModel):
    """
    Continuous pixel coordinates of the points of a cloud that land in an image
    """

    uv: np.ndarray = Field(..., description="(u, v) coordinates, shape (m, 2)")
    z: np.ndarray = Field(..., description="Camera-frame depth of each kept point")
    indices: np.ndarray = Field(
        ..., description="Index of each kept point in the projected cloud"
    )
    n_behind: int = Field(0, description="Points with z <= 0 that were skipped")
    n_outside: int = Field(0, description="Points landing outside the image")

    class Config:
        arbitrary_types_allowed = True

    def __len__(self) -> int:
        return len(self.z)

    def pixels(self) -> np.ndarray:
        """Nearest-integer (round half up) pixel of every kept point"""
        return np.floor(self.uv + 0.5).astype(np.int64)


def _check_nonempty(pixel_map: PixelMap):
    if pixel_map.values.size == 0:
        raise EmptyInputError(f"{type(pixel_map).__name__} has no pixels")


def disparity_to_depth(
    d_map: DisparityMap,
    calib: CameraCalib,
    min_depth: float = SETTINGS.MIN_DEPTH,
    max_depth: float = SETTINGS.MAX_DEPTH,
) -> DepthMap:
    """
    Converts disparity to depth through z = f_u * b / d

    Pixels with zero disparity, or whose depth falls outside [min_depth, max_depth],
    become invalid rather than saturated

    Args:
        d_map: disparity map in pixels
        calib: camera calibration
        min_depth: smallest depth kept valid, meters
        max_depth: largest depth kept valid, meters
    """
    _check_nonempty(d_map)
    valid = d_map.valid_mask & (d_map.values > 0)
    safe = np.where(valid, d_map.values, 1.0)
    z = calib.focal_baseline / safe
    valid &= (z >= min_depth) & (z <= max_depth)
    return DepthMap(values=np.where(valid, z, 0.0), valid_mask=valid)


def depth_to_disparity(z_map: DepthMap, calib: CameraCalib) -> DisparityMap:
    """
    Converts depth to disparity through d = f_u * b / z
    """
    _check_nonempty(z_map)
    valid = z_map.valid_mask
    safe = np.where(valid, z_map.values, 1.0)
    d = calib.focal_baseline / safe
    return DisparityMap(values=np.where(valid, d, 0.0), valid_mask=valid)


def backproject(z_map: DepthMap, calib: CameraCalib) -> PointCloud:
    """
    Lifts every valid pixel to a camera-frame point (pseudo-LiDAR).
    Points are emitted in row-major pixel order and keep their source pixel
    """
    v, u = np.nonzero(z_map.valid_mask)
    z = z_map.values[v, u]
    x = (u - calib.c_u) * z / calib.f_u
    y = (v - calib.c_v) * z / calib.f_v
    return PointCloud(
        xyz=np.stack([x, y, z], axis=1), source_pixels=np.stack([u, v], axis=1)
    )


def project(
    points: PointCloud, calib: CameraCalib, image_size: Tuple[int, int]
) -> Projection:
    """
    Projects camera-frame points to continuous pixel coordinates

    Points behind the camera (z <= 0) and points outside the image are dropped and
    counted. The image covers [-0.5, width - 0.5) x [-0.5, height - 0.5) so that
    every kept point rounds to a pixel inside it

    Args:
        points: camera-frame point cloud
        calib: camera calibration
        image_size: (width, height) in pixels
    """
    width, height = image_size
    x, y, z = points.xyz.T
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    u = calib.f_u * x / safe_z + calib.c_u
    v = calib.f_v * y / safe_z + calib.c_v
    inside = (u >= -0.5) & (u < width - 0.5) & (v >= -0.5) & (v < height - 0.5)
    keep = in_front & inside
    n_behind = int((~in_front).sum())
    n_outside = int((in_front & ~inside).sum())
    if n_behind or n_outside:
        logger.debug(
            f"Projection dropped {n_behind} points behind the camera"
            f" and {n_outside} outside the image"
        )
    return Projection(
        uv=np.stack([u[keep], v[keep]], axis=1),
        z=z[keep],
        indices=np.flatnonzero(keep),
        n_behind=n_behind,
        n_outside=n_outside,
    )


def depth_error_bound(z: ArrayLike, delta_d: ArrayLike, calib: CameraCalib) -> ArrayLike:
    """
    First-order depth error caused by a disparity error delta_d at depth z:
    dZ = z^2 * dD / (f_u * b)
    """
    z = np.asarray(z, dtype=np.float64)
    return z ** 2 * np.asarray(delta_d, dtype=np.float64) / calib.focal_baseline


def depth_shift(z: ArrayLike, delta_d: ArrayLike, calib: CameraCalib) -> ArrayLike:
    """
    Exact depth change when the disparity of a point at depth z grows by delta_d
    """
    z = np.asarray(z, dtype=np.float64)
    fb = calib.focal_baseline
    return z - fb / (fb / z + np.asarray(delta_d, dtype=np.float64))
