"""
Graph-based depth correction: exact LiDAR depths are pinned on the pseudo-LiDAR
points they hit and the correction diffuses to every other point through the
KNN reconstruction weights
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, validator
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import lsqr

from plidar.core import SETTINGS
from plidar.core.errors import ShapeMismatchError
from plidar.core.geometry import CameraCalib, DepthMap, PointCloud, backproject, project
from plidar.core.knn import KnnWeights, build_knn, solve_weights
from plidar.core.lidar import (
    AXIS_PERMUTATION,
    BeamSelection,
    LidarScan,
    lidar_to_camera,
    sparsify,
)
from plidar.core.utils import CorrectionStatus

logger = logging.getLogger(__name__)

# lsqr istop codes that mean the tolerance was met
CONVERGED_STOPS = {0, 1, 2, 4, 5}


class LandmarkSet(BaseModel):
    """
    LiDAR depths matched to pixels of the stereo depth map, one per pixel
    """

    pixels: np.ndarray = Field(..., description="Matched (u, v) pixels, shape (n, 2)")
    depths: np.ndarray = Field(..., description="LiDAR depth G of each matched pixel, meters")
    matched_indices: np.ndarray = Field(
        ..., description="Index of the pseudo-LiDAR point at each matched pixel"
    )
    n_points: int = Field(..., description="Pseudo-LiDAR points in the depth map")
    n_outside: int = Field(0, description="LiDAR points projecting outside the image")
    n_invalid: int = Field(0, description="LiDAR points landing on invalid stereo pixels")
    n_occluded: int = Field(0, description="LiDAR points behind a nearer one on the same pixel")

    class Config:
        arbitrary_types_allowed = True

    @validator("pixels", "matched_indices", pre=True)
    def as_index(cls, v):
        return np.asarray(v, dtype=np.int64)

    @validator("depths", pre=True)
    def as_depths(cls, v):
        return np.asarray(v, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.depths)

    @property
    def n_unmatched(self) -> int:
        """m, the pseudo-LiDAR points without a LiDAR depth"""
        return self.n_points - len(self)

    @property
    def pixel_to_landmark(self) -> Dict[Tuple[int, int], float]:
        return {(int(u), int(v)): float(z) for (u, v), z in zip(self.pixels, self.depths)}


class CorrectedDepth(BaseModel):
    """
    Result of a depth correction: per-point depths Z' in back-projection order
    and the corrected depth map
    """

    depth_map: DepthMap = Field(..., description="Corrected depth map")
    depths: np.ndarray = Field(..., description="Corrected depth of every pseudo-LiDAR point")
    landmark: np.ndarray = Field(..., description="Whether each point is pinned to LiDAR")
    status: CorrectionStatus = Field(..., description="Outcome of the correction")
    residual: Optional[float] = Field(None, description="Final |(I - W) Z'|")
    initial_residual: Optional[float] = Field(
        None, description="|(I - W) Z'| at the warm start [G; Z]"
    )
    iterations: int = Field(0, description="Solver iterations")
    n_free: int = Field(0, description="Points solved for")
    n_unreached: int = Field(
        0, description="Points in graph components without a landmark, left unchanged"
    )
    stage_counts: Dict[str, int] = Field({}, description="Counts logged by the pipeline")

    class Config:
        arbitrary_types_allowed = True

    @property
    def converged(self) -> bool:
        return self.status is not CorrectionStatus.not_converged

    @property
    def n_landmarks(self) -> int:
        return int(self.landmark.sum())


def _point_index_map(z_map: DepthMap) -> np.ndarray:
    """Index of the back-projected point of every pixel, -1 on invalid pixels"""
    index = np.full(z_map.shape, -1, dtype=np.int64)
    index[z_map.valid_mask] = np.arange(z_map.n_valid)
    return index


def match_landmarks(
    lidar_cam: PointCloud, z_map: DepthMap, calib: CameraCalib
) -> LandmarkSet:
    """
    Matches camera-frame LiDAR points to stereo pixels

    Points are projected and rounded to the nearest pixel; points outside the image
    or on invalid stereo pixels are dropped. When several points hit one pixel the
    nearest depth is kept

    Args:
        lidar_cam: LiDAR points in the camera frame
        z_map: stereo depth map the pseudo-LiDAR cloud is built from
        calib: camera calibration
    """
    projection = project(lidar_cam, calib, (z_map.width, z_map.height))
    u, v = projection.pixels().T
    z = projection.z

    on_valid = z_map.valid_mask[v, u]
    u, v, z, order = u[on_valid], v[on_valid], z[on_valid], projection.indices[on_valid]
    n_invalid = int((~on_valid).sum())

    linear = v * z_map.width + u
    first = np.lexsort((order, z, linear))
    _, keep = np.unique(linear[first], return_index=True)
    chosen = first[keep]
    n_occluded = len(linear) - len(chosen)

    point_index = _point_index_map(z_map)[v[chosen], u[chosen]]
    landmarks = LandmarkSet(
        pixels=np.stack([u[chosen], v[chosen]], axis=1),
        depths=z[chosen],
        matched_indices=point_index,
        n_points=z_map.n_valid,
        n_outside=projection.n_outside,
        n_invalid=n_invalid,
        n_occluded=n_occluded,
    )
    if len(landmarks) == 0:
        logger.warning("No LiDAR point matched a valid stereo pixel")
    return landmarks


def _with_depths(z_map: DepthMap, depths: np.ndarray) -> DepthMap:
    values = z_map.values.copy()
    values[z_map.valid_mask] = depths
    return DepthMap.from_array(values, valid_mask=z_map.valid_mask)


def _check_landmarks(z_map: DepthMap, landmarks: LandmarkSet):
    if landmarks.n_points != z_map.n_valid:
        raise ShapeMismatchError(
            f"Landmarks were matched against {landmarks.n_points} points,"
            f" the depth map has {z_map.n_valid}"
        )


def _uncorrected(z_map: DepthMap, landmark: np.ndarray) -> CorrectedDepth:
    return CorrectedDepth(
        depth_map=z_map,
        depths=z_map.values[z_map.valid_mask],
        landmark=landmark,
        status=CorrectionStatus.no_landmarks,
    )


def component_offsets(
    component: np.ndarray, n_components: int, landmarks: LandmarkSet, stereo: np.ndarray
) -> np.ndarray:
    """Mean landmark offset G - Z of every point's graph component, 0 without landmarks"""
    owner = component[landmarks.matched_indices]
    offset = landmarks.depths - stereo[landmarks.matched_indices]
    sums = np.bincount(owner, weights=offset, minlength=n_components)
    counts = np.bincount(owner, minlength=n_components)
    mean = np.divide(sums, counts, out=np.zeros(n_components), where=counts > 0)
    return mean[component]


def correct(
    z_map: DepthMap,
    weights: KnnWeights,
    landmarks: LandmarkSet,
    tol: float = SETTINGS.GDC_TOL,
    max_iter: Optional[int] = None,
) -> CorrectedDepth:
    """
    Corrects stereo depths with pinned LiDAR landmarks

    Z'_L = G exactly and the free depths minimize |(I - W) [G; Z'_free]|^2. Only points
    of graph components that hold a landmark are free; the others keep their stereo
    depth.

    W reproduces both constants and the stereo depths, so the minimizer is not unique
    when a component holds a single landmark. LSQR starts from the stereo depths
    shifted by the mean landmark offset G - Z of their component and returns the
    solution closest to that start: a single landmark shifts its component uniformly

    Args:
        z_map: stereo depth map; its valid pixels in row-major order are the points
        weights: reconstruction weights over those points
        landmarks: matched LiDAR depths
        tol: LSQR atol and btol
        max_iter: iteration limit, defaults to GDC_MAX_ITER_FACTOR per free point
    """
    _check_landmarks(z_map, landmarks)
    if weights.n_points != z_map.n_valid:
        raise ShapeMismatchError(
            f"Weights cover {weights.n_points} points, the depth map has {z_map.n_valid}"
        )

    n = z_map.n_valid
    pinned = landmarks.matched_indices
    landmark = np.zeros(n, dtype=bool)
    landmark[pinned] = True
    if len(landmarks) == 0:
        return _uncorrected(z_map, landmark)

    W = weights.to_matrix()
    A = (sparse.identity(n, format="csr") - W).tocsr()

    n_components, component = connected_components(W, directed=True, connection="weak")
    reached = np.isin(component, np.unique(component[pinned]))
    free = reached & ~landmark

    stereo = z_map.values[z_map.valid_mask]
    corrected = stereo.copy()
    corrected[pinned] = landmarks.depths
    initial_residual = float(np.linalg.norm(A @ corrected))

    n_free = int(free.sum())
    iterations, status = 0, CorrectionStatus.converged
    if n_free:
        max_iter = max_iter or SETTINGS.GDC_MAX_ITER_FACTOR * n_free
        start = corrected.copy()
        start[free] += component_offsets(component, n_components, landmarks, stereo)[free]
        A_free = A[reached][:, free]
        # conlim=0 disables the condition number stop
        delta, istop, iterations, *_ = lsqr(
            A_free, -(A @ start)[reached], atol=tol, btol=tol, conlim=0, iter_lim=max_iter
        )
        candidate = start.copy()
        candidate[free] += delta
        if np.linalg.norm(A @ candidate) <= initial_residual:
            corrected = candidate
        if istop not in CONVERGED_STOPS:
            status = CorrectionStatus.not_converged
            logger.warning(
                f"Depth correction stopped after {iterations} iterations without converging"
            )

    residual = float(np.linalg.norm(A @ corrected))
    n_unreached = int((~reached).sum())
    logger.info(
        f"Corrected {n_free} free points from {len(landmarks)} landmarks in {iterations}"
        f" iterations, residual {initial_residual:.3e} -> {residual:.3e}"
        f" ({n_unreached} points in components without landmarks)"
    )
    return CorrectedDepth(
        depth_map=_with_depths(z_map, corrected),
        depths=corrected,
        landmark=landmark,
        status=status,
        residual=residual,
        initial_residual=initial_residual,
        iterations=iterations,
        n_free=n_free,
        n_unreached=n_unreached,
    )


def replace_landmarks(z_map: DepthMap, landmarks: LandmarkSet) -> CorrectedDepth:
    """
    Overwrites the landmark pixels with their LiDAR depth and leaves every other
    pixel untouched
    """
    _check_landmarks(z_map, landmarks)
    landmark = np.zeros(z_map.n_valid, dtype=bool)
    landmark[landmarks.matched_indices] = True
    if len(landmarks) == 0:
        return _uncorrected(z_map, landmark)

    depths = z_map.values[z_map.valid_mask].copy()
    depths[landmarks.matched_indices] = landmarks.depths
    return CorrectedDepth(
        depth_map=_with_depths(z_map, depths),
        depths=depths,
        landmark=landmark,
        status=CorrectionStatus.replaced,
    )


def gdc_pipeline(
    z_map: DepthMap,
    calib: CameraCalib,
    lidar_scan: LidarScan,
    beam_selection: BeamSelection,
    k: int = SETTINGS.KNN_K,
    tol: float = SETTINGS.GDC_TOL,
    extrinsics: np.ndarray = AXIS_PERMUTATION,
    max_iter: Optional[int] = None,
    regularization: float = SETTINGS.WEIGHT_REGULARIZATION,
) -> CorrectedDepth:
    """
    Full correction of a stereo depth map with a simulated sparse LiDAR:
    sparsify, move to the camera frame, match landmarks, back-project, build the
    KNN graph, solve the weights and correct.

    Landmarks are matched before the graph is built so that a scan without matches
    returns the input unchanged without building it
    """
    counts = {"scan_points": len(lidar_scan)}

    sparse_scan = sparsify(lidar_scan, beam_selection)
    counts["beam_points"] = len(sparse_scan)

    lidar_cam = lidar_to_camera(sparse_scan, extrinsics)
    counts["camera_points"] = len(lidar_cam)

    landmarks = match_landmarks(lidar_cam, z_map, calib)
    counts["landmarks"] = len(landmarks)
    counts["pseudo_lidar_points"] = z_map.n_valid
    logger.info(
        f"{counts['scan_points']} scan points, {counts['beam_points']} on selected beams,"
        f" {counts['camera_points']} in front of the camera, {counts['landmarks']} landmarks"
        f" among {counts['pseudo_lidar_points']} pseudo-LiDAR points"
    )

    if len(landmarks) == 0:
        result = _uncorrected(z_map, np.zeros(z_map.n_valid, dtype=bool))
        result.stage_counts = counts
        return result

    cloud = backproject(z_map, calib)
    neighbors = build_knn(cloud, k)
    weights = solve_weights(cloud, neighbors, regularization=regularization)
    counts["k"] = neighbors.k
    counts["degenerate_rows"] = weights.n_degenerate
    logger.info(
        f"KNN graph with k={neighbors.k}"
        f"{' (clamped)' if neighbors.k_clamped else ''}, {weights.n_degenerate} degenerate rows"
    )

    result = correct(z_map, weights, landmarks, tol=tol, max_iter=max_iter)
    counts["free_points"] = result.n_free
    counts["iterations"] = result.iterations
    result.stage_counts = counts
    return result
