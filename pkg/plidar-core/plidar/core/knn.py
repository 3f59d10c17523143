"""
Directed K-nearest-neighbor graph over a pseudo-LiDAR cloud and the row-stochastic
weights reconstructing every point's depth from its neighbors
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator
from scipy import sparse, spatial

from plidar.core import SETTINGS
from plidar.core.errors import EmptyInputError, ShapeMismatchError
from plidar.core.geometry import PointCloud

logger = logging.getLogger(__name__)

# a neighborhood is flat when its centered depth spread is this small relative to its depths
DEGENERATE_SPREAD = 1e-12
ROW_SUM_TOL = 1e-8


class NeighborLists(BaseModel):
    """
    The k nearest other points of every point, nearest first, ties by lower index
    """

    neighbors: np.ndarray = Field(..., description="Neighbor indices, shape (n, k)")
    sq_distances: np.ndarray = Field(
        ..., description="Squared Euclidean distance to each neighbor, shape (n, k)"
    )
    k: int = Field(..., description="Neighborhood size actually used")
    k_requested: int = Field(..., description="Neighborhood size asked for")

    class Config:
        arbitrary_types_allowed = True

    @property
    def n_points(self) -> int:
        return len(self.neighbors)

    @property
    def k_clamped(self) -> bool:
        """Whether the cloud was too small for the requested k"""
        return self.k < self.k_requested


class KnnWeights(BaseModel):
    """
    Sparse row-stochastic reconstruction weights: row i holds W_ij for j in N_i
    and is zero elsewhere
    """

    n_points: int = Field(..., description="Number of points (rows and columns)")
    k: int = Field(..., description="Neighbors per row")
    neighbors: np.ndarray = Field(..., description="Neighbor indices N_i, shape (n, k)")
    weights: np.ndarray = Field(..., description="Weights W_ij matching neighbors, shape (n, k)")
    degenerate: np.ndarray = Field(
        ...,
        description="Rows whose neighbors share one depth different from the point's own;"
        " these fall back to uniform weights",
    )
    k_clamped: bool = Field(False, description="Whether k was reduced to fit the cloud")

    class Config:
        arbitrary_types_allowed = True

    @validator("neighbors", pre=True)
    def as_index(cls, v):
        return np.asarray(v, dtype=np.int64)

    @validator("weights", pre=True)
    def as_weights(cls, v):
        return np.asarray(v, dtype=np.float64)

    @validator("degenerate", pre=True)
    def as_flags(cls, v):
        return np.asarray(v, dtype=bool)

    @root_validator(skip_on_failure=True)
    def row_stochastic(cls, values):
        n, k = values["n_points"], values["k"]
        neighbors, weights = values["neighbors"], values["weights"]
        if neighbors.shape != (n, k) or weights.shape != (n, k):
            raise ValueError(
                f"neighbors {neighbors.shape} and weights {weights.shape} must be ({n}, {k})"
            )
        if np.any(neighbors == np.arange(n)[:, None]):
            raise ValueError("A point cannot be its own neighbor")
        if n and np.max(np.abs(weights.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("Every weight row must sum to one")
        return values

    @property
    def n_degenerate(self) -> int:
        return int(self.degenerate.sum())

    def to_matrix(self) -> sparse.csr_matrix:
        """W as an (n, n) sparse matrix"""
        rows = np.repeat(np.arange(self.n_points), self.k)
        return sparse.csr_matrix(
            (self.weights.ravel(), (rows, self.neighbors.ravel())),
            shape=(self.n_points, self.n_points),
        )

    def reconstruct(self, depths: np.ndarray) -> np.ndarray:
        """W Z"""
        return (self.weights * np.asarray(depths)[self.neighbors]).sum(axis=1)

    def to_triplets(self, path: Union[str, Path]):
        """Writes one 'row col weight' line per stored entry"""
        rows = np.repeat(np.arange(self.n_points), self.k)
        table = np.column_stack([rows, self.neighbors.ravel(), self.weights.ravel()])
        np.savetxt(str(path), table, fmt=["%d", "%d", "%.17g"])


def _sorted_candidates(xyz: np.ndarray, candidates: np.ndarray, rows: np.ndarray):
    """
    Exact squared distances from each row's point to its candidates, ordered
    by (distance, index); the point itself sorts last
    """
    sq = ((xyz[candidates] - xyz[rows][:, None, :]) ** 2).sum(axis=-1)
    sq = np.where(candidates == rows[:, None], np.inf, sq)
    order = np.lexsort((candidates, sq), axis=-1)
    return (
        np.take_along_axis(candidates, order, axis=-1),
        np.take_along_axis(sq, order, axis=-1),
    )


def build_knn(
    points: PointCloud, k: int = SETTINGS.KNN_K, slack: int = SETTINGS.KNN_QUERY_SLACK
) -> NeighborLists:
    """
    Directed KNN graph by 3-D Euclidean distance, using a KD-tree

    The tree is queried for a few extra neighbors; rows whose k-th distance could
    still tie with an unqueried point are completed with an exact radius search,
    so the result always equals the brute-force ordering

    Args:
        points: point cloud
        k: neighbors per point; clamped to n - 1 for small clouds
        slack: extra neighbors fetched per point
    """
    n = len(points)
    if n < 2:
        raise EmptyInputError(f"A KNN graph needs at least two points, got {n}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")

    k_used = min(k, n - 1)
    if k_used < k:
        logger.warning(f"Clamping k from {k} to {k_used} for a cloud of {n} points")

    xyz = points.xyz
    tree = spatial.cKDTree(xyz)
    n_query = min(k_used + 1 + slack, n)
    tree_dist, candidates = tree.query(xyz, k=n_query)

    rows = np.arange(n)
    ordered, sq = _sorted_candidates(xyz, candidates, rows)
    neighbors, sq_distances = ordered[:, :k_used], sq[:, :k_used]

    if n_query < n:
        bound = sq_distances[:, -1] * (1 + 1e-9) + 1e-12
        unsafe = np.flatnonzero(tree_dist[:, -1] ** 2 <= bound)
        for i in unsafe:
            ball = np.asarray(tree.query_ball_point(xyz[i], np.sqrt(bound[i])), dtype=np.int64)
            row_ordered, row_sq = _sorted_candidates(xyz, ball[None, :], rows[i : i + 1])
            neighbors[i], sq_distances[i] = row_ordered[0, :k_used], row_sq[0, :k_used]
        if len(unsafe):
            logger.debug(f"Resolved {len(unsafe)} KNN rows by radius search")

    return NeighborLists(
        neighbors=neighbors, sq_distances=sq_distances, k=k_used, k_requested=k
    )


def solve_weights(
    points: PointCloud,
    neighbors: NeighborLists,
    depths: Optional[np.ndarray] = None,
    regularization: float = SETTINGS.WEIGHT_REGULARIZATION,
) -> KnnWeights:
    """
    Minimum-norm row-stochastic weights reconstructing each depth from its neighbors

    Each row solves min_w (w . z_N - Z_i)^2 + lambda * tr(C) * |w|^2 s.t. sum(w) = 1,
    with C the centered Gram matrix of the neighbor depths. The closed form is
    w = 1/k + beta * (z_N - mean(z_N)) with beta = (Z_i - mean(z_N)) / (|z_N - mean|^2 (1 + lambda)),
    which for lambda = 0 is the exact reconstruction of least norm. With the ridge
    relative to tr(C), every row reconstructs Z_i up to lambda / (1 + lambda) of its
    offset Z_i - mean(z_N) whatever the depth, also in tight far neighborhoods where
    tr(C) is many orders below the squared depths.

    Rows whose neighbor depths are all equal take uniform weights; they are flagged
    when the point's own depth differs from them.

    Args:
        points: the cloud the neighbors were built on
        neighbors: KNN graph of the cloud
        depths: per-point depths, defaults to the points' z coordinates
        regularization: lambda, relative to the neighborhood depth spread
    """
    z = points.depths if depths is None else np.asarray(depths, dtype=np.float64)
    if len(z) != neighbors.n_points:
        raise ShapeMismatchError(
            f"{len(z)} depths for a graph over {neighbors.n_points} points"
        )

    k = neighbors.k
    z_n = z[neighbors.neighbors]
    center = z_n.mean(axis=1)
    spread = z_n - center[:, None]
    spread_sq = (spread ** 2).sum(axis=1)
    offset = z - center

    flat = spread_sq <= DEGENERATE_SPREAD * (z_n ** 2).sum(axis=1)
    beta = np.zeros_like(offset)
    beta[~flat] = offset[~flat] / (spread_sq[~flat] * (1.0 + regularization))

    weights = 1.0 / k + beta[:, None] * spread
    # exact row sums
    weights += ((1.0 - weights.sum(axis=1)) / k)[:, None]

    degenerate = flat & (np.abs(offset) > 1e-9 * np.maximum(1.0, np.abs(z)))
    if degenerate.any():
        logger.warning(
            f"{int(degenerate.sum())} rows have equal neighbor depths and use uniform weights"
        )

    return KnnWeights(
        n_points=len(z),
        k=k,
        neighbors=neighbors.neighbors,
        weights=weights,
        degenerate=degenerate,
        k_clamped=neighbors.k_clamped,
    )
