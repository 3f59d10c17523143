""" Depth error metrics: binned median absolute error and the smooth L1 loss """
import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, validator

from plidar.core import SETTINGS
from plidar.core.errors import NoValidPixelsError, ShapeMismatchError
from plidar.core.geometry import CameraCalib, DepthMap, PixelMap, PointCloud, project

logger = logging.getLogger(__name__)

CSV_HEADER = "bin_lo,bin_hi,count,median_abs_err_m"


class BinnedErrorReport(BaseModel):
    """
    Median absolute depth error of the jointly valid pixels, grouped by true depth.
    Bins are half-open [lo, hi); empty bins have count 0 and a NaN median
    """

    bin_edges: List[float] = Field(..., description="Contiguous bin edges in meters")
    medians: List[float] = Field(..., description="Median absolute error per bin, meters")
    counts: List[int] = Field(..., description="Pixels per bin")
    overall_median: float = Field(..., description="Median absolute error over all binned pixels")
    total_count: int = Field(..., description="Pixels in any bin")
    n_out_of_range: int = Field(
        0, description="Jointly valid pixels whose true depth falls outside every bin"
    )

    @validator("bin_edges")
    def increasing_edges(cls, v):
        if len(v) < 2 or np.any(np.diff(v) <= 0):
            raise ValueError("Bin edges must be at least two increasing values")
        return v

    @property
    def bins(self) -> List[Tuple[float, float]]:
        return list(zip(self.bin_edges[:-1], self.bin_edges[1:]))

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        buffer = io.StringIO()
        buffer.write(CSV_HEADER + "\n")
        for (lo, hi), count, median in zip(self.bins, self.counts, self.medians):
            buffer.write(f"{lo:g},{hi:g},{count},{median:.6f}\n")
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_table(self) -> str:
        lines = [f"{'depth (m)':>12} {'pixels':>9} {'median |err| (m)':>17}"]
        for (lo, hi), count, median in zip(self.bins, self.counts, self.medians):
            lines.append(f"{f'{lo:g}-{hi:g}':>12} {count:>9d} {median:>17.4f}")
        lines.append(f"{'all':>12} {self.total_count:>9d} {self.overall_median:>17.4f}")
        return "\n".join(lines)

    def plot_svg(self, path: Union[str, Path], label: str = "error", title: str = ""):
        plot_reports({label: self}, path, title=title)


def plot_reports(
    reports: Dict[str, BinnedErrorReport],
    path: Union[str, Path],
    title: str = "",
    size: Tuple[float, float] = (6.4, 3.6),
):
    """
    Grouped bar chart of the per-bin median errors of reports sharing bin edges
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    edges = np.asarray(next(iter(reports.values())).bin_edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    group_width = 0.8 * np.diff(edges)
    bar_width = group_width / len(reports)

    fig, ax = plt.subplots(figsize=size)
    for i, (label, report) in enumerate(reports.items()):
        if not np.array_equal(report.bin_edges, edges):
            raise ValueError("Reports plotted together must share bin edges")
        offsets = centers - group_width / 2 + (i + 0.5) * bar_width
        ax.bar(offsets, np.nan_to_num(report.medians), width=bar_width, label=label)
    ax.set_xlabel("true depth (m)")
    ax.set_ylabel("median absolute error (m)")
    ax.set_xticks(edges)
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    plt.close(fig)


def _joint_valid(pred: PixelMap, truth: PixelMap) -> np.ndarray:
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"Prediction {pred.shape} and truth {truth.shape} differ")
    joint = pred.valid_mask & truth.valid_mask
    if not joint.any():
        raise NoValidPixelsError("No pixel is valid in both maps")
    return joint


def binned_median_error(
    pred: DepthMap, truth: DepthMap, bin_edges: Optional[Sequence[float]] = None
) -> BinnedErrorReport:
    """
    Median of |pred - truth| per true-depth bin over the pixels valid in both maps

    Args:
        pred: estimated depth
        truth: ground truth depth
        bin_edges: increasing edges in meters, defaults to ERROR_BIN_EDGES
    """
    edges = np.asarray(
        SETTINGS.ERROR_BIN_EDGES if bin_edges is None else bin_edges, dtype=np.float64
    )
    joint = _joint_valid(pred, truth)
    true_z = truth.values[joint]
    error = np.abs(pred.values[joint] - true_z)

    which = np.searchsorted(edges, true_z, side="right") - 1
    in_range = (which >= 0) & (which < len(edges) - 1)

    medians, counts = [], []
    for b in range(len(edges) - 1):
        in_bin = error[in_range & (which == b)]
        counts.append(int(in_bin.size))
        medians.append(float(np.median(in_bin)) if in_bin.size else float("nan"))

    binned = error[in_range]
    return BinnedErrorReport(
        bin_edges=edges.tolist(),
        medians=medians,
        counts=counts,
        overall_median=float(np.median(binned)) if binned.size else float("nan"),
        total_count=int(binned.size),
        n_out_of_range=int((~in_range).sum()),
    )


def smooth_l1(
    pred: Union[PixelMap, np.ndarray],
    truth: Union[PixelMap, np.ndarray],
    mask: Optional[np.ndarray] = None,
    beta: float = SETTINGS.SMOOTH_L1_BETA,
) -> float:
    """
    Mean smooth L1 loss of the residuals pred - truth over the mask:
    0.5 r^2 / beta where |r| < beta, |r| - 0.5 beta elsewhere.
    For pixel maps the mask defaults to the pixels valid in both
    """
    if isinstance(pred, PixelMap) and isinstance(truth, PixelMap):
        joint = _joint_valid(pred, truth)
        mask = joint if mask is None else joint & np.asarray(mask, dtype=bool)
        pred, truth = pred.values, truth.values

    pred, truth = np.asarray(pred, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeMismatchError(f"Prediction {pred.shape} and truth {truth.shape} differ")
    mask = np.ones(pred.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise NoValidPixelsError("smooth_l1 needs at least one pixel in the mask")

    r = np.abs(pred[mask] - truth[mask])
    loss = np.where(r < beta, 0.5 * r ** 2 / beta, r - 0.5 * beta)
    return float(loss.mean())


def lidar_depth_map(
    cloud: PointCloud, calib: CameraCalib, image_size: Tuple[int, int]
) -> DepthMap:
    """
    Sparse ground truth from camera-frame LiDAR points; the nearest depth wins
    on pixels hit more than once
    """
    width, height = image_size
    projection = project(cloud, calib, image_size)
    u, v = projection.pixels().T
    nearest = np.full(width * height, np.inf)
    np.minimum.at(nearest, v * width + u, projection.z)
    nearest = nearest.reshape(height, width)
    return DepthMap.from_array(np.where(np.isfinite(nearest), nearest, 0.0))
