import logging
from pathlib import Path

import click
import numpy as np

from plidar.cli import SETTINGS
from plidar.cli.decorators import track
from plidar.cli.utils import PlidarCliError, ReturnCodes
from plidar.core.evaluation import binned_median_error, lidar_depth_map, plot_reports
from plidar.core.kitti import read_calib, read_depth_png, read_velodyne
from plidar.core.lidar import lidar_to_camera

logger = logging.getLogger("plidar")


def parse_bin_edges(text):
    if text is None:
        return None
    try:
        edges = [float(e) for e in text.split(",")]
    except ValueError:
        raise PlidarCliError(f"Bin edges must be comma separated numbers, got {text}")
    if len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise PlidarCliError(f"Bin edges must be at least two increasing values, got {text}")
    return edges


def prediction_label(path: Path, taken) -> str:
    label = f"{path.parent.name}/{path.stem}"
    n = 2
    unique = label
    while unique in taken:
        unique = f"{label}#{n}"
        n += 1
    return unique


@click.command("eval")
@click.argument("truth", type=click.Path(exists=True, dir_okay=False))
@click.argument("preds", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--calib",
    type=click.Path(exists=True, dir_okay=False),
    help="KITTI calibration, needed when TRUTH is a velodyne .bin scan.",
)
@click.option("--bin-edges", help="Comma separated depth bin edges in meters.")
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False),
    help="Write one CSV per prediction here instead of next to each prediction.",
)
@click.option("--svg", type=click.Path(dir_okay=False), help="Bar chart of all predictions.")
@click.option("--title", default="", help="Title of the bar chart.")
@track
def evaluate(truth, preds, calib, bin_edges, out_dir, svg, title):
    """Median absolute depth error of predictions per true-depth bin"""
    edges = parse_bin_edges(bin_edges)
    pred_maps, pred_paths = {}, {}
    for path in map(Path, preds):
        label = prediction_label(path, pred_maps)
        pred_maps[label] = read_depth_png(path)
        pred_paths[label] = path

    truth = Path(truth)
    if truth.suffix == ".bin":
        if calib is None:
            raise PlidarCliError("A velodyne TRUTH needs --calib")
        kitti_calib = read_calib(calib)
        height, width = next(iter(pred_maps.values())).shape
        cloud = lidar_to_camera(read_velodyne(truth), kitti_calib.extrinsics)
        truth_map = lidar_depth_map(cloud, kitti_calib.camera, (width, height))
    else:
        truth_map = read_depth_png(truth)
    logger.info(f"{truth_map.n_valid} ground truth pixels in {truth}")

    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    reports = {}
    for label, pred_map in pred_maps.items():
        report = binned_median_error(pred_map, truth_map, edges)
        reports[label] = report
        click.echo(f"{label}\n{report.to_table()}\n")
        if out_dir:
            csv_path = Path(out_dir) / f"{label.replace('/', '_').replace('#', '_')}.csv"
        else:
            csv_path = pred_paths[label].with_suffix(".csv")
        report.to_csv(csv_path)
        logger.info(f"Wrote {csv_path}")

    if svg:
        plot_reports(reports, svg, title=title, size=SETTINGS.svg_size)
        logger.info(f"Wrote {svg}")
    return ReturnCodes.SUCCESS
