import logging
from pathlib import Path

import click
from pydantic import ValidationError

from plidar.cli import SETTINGS
from plidar.cli.decorators import track
from plidar.cli.utils import PlidarCliError, ReturnCodes, scene_path
from plidar.core.gdc import gdc_pipeline, match_landmarks, replace_landmarks
from plidar.core.kitti import (
    read_calib,
    read_depth_png,
    read_velodyne,
    write_depth_png,
    write_velodyne,
)
from plidar.core.lidar import BeamSelection, lidar_to_camera, sparsify

logger = logging.getLogger("plidar")

BEAM_CHOICES = BeamSelection.preset_names() + ["custom"]


def beam_selection(beams: str, intervals) -> BeamSelection:
    """a beam preset, or the --interval list when beams is custom"""
    if beams != "custom":
        if intervals:
            raise PlidarCliError("--interval is only used with --beams custom")
        return BeamSelection.from_preset(beams)

    if not intervals:
        raise PlidarCliError("--beams custom needs at least one --interval")
    try:
        return BeamSelection(selected_intervals=[tuple(i) for i in intervals])
    except ValidationError as e:
        raise PlidarCliError(f"Invalid beam intervals:\n{e}")


beams_option = click.option(
    "--beams",
    type=click.Choice(BEAM_CHOICES),
    default=SETTINGS.DEFAULT_BEAMS,
    show_default=True,
    help="Beam preset to keep, or custom elevation intervals.",
)
interval_option = click.option(
    "--interval",
    "intervals",
    type=(float, float),
    multiple=True,
    help="[LO, HI) elevation interval in degrees, repeatable, for --beams custom.",
)


@click.command("sparsify")
@click.argument("velodyne", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@beams_option
@interval_option
@track
def sparsify_scan(velodyne, out, beams, intervals):
    """Keep only the returns of the selected LiDAR beams"""
    selection = beam_selection(beams, intervals)
    scan = read_velodyne(velodyne)
    sparse_scan = sparsify(scan, selection)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_velodyne(out, sparse_scan)
    logger.info(
        f"Kept {len(sparse_scan)} of {len(scan)} returns on"
        f" {len(selection.bins())} beams in {out}"
    )
    return ReturnCodes.SUCCESS


@click.command("correct")
@click.option(
    "--scene",
    type=click.Path(exists=True, file_okay=False),
    help="Scene directory providing every file not given explicitly.",
)
@click.option("--frame-id", default="000000", show_default=True, help="Frame to correct.")
@click.option(
    "--depth", type=click.Path(exists=True, dir_okay=False), help="Stereo depth PNG to correct."
)
@click.option("--calib", type=click.Path(exists=True, dir_okay=False), help="KITTI calibration.")
@click.option(
    "--velodyne", type=click.Path(exists=True, dir_okay=False), help="Full LiDAR scan .bin."
)
@beams_option
@interval_option
@click.option("--k", type=int, default=SETTINGS.KNN_K, show_default=True, help="KNN graph size.")
@click.option("--tol", type=float, default=SETTINGS.GDC_TOL, show_default=True)
@click.option(
    "--method",
    type=click.Choice(["gdc", "replace"]),
    default="gdc",
    show_default=True,
    help="Propagate LiDAR corrections through the graph or only overwrite landmarks.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    help="Corrected depth PNG (<scene>/corrected_2/<frame>.png by default).",
)
@track
def correct_depth(scene, frame_id, depth, calib, velodyne, beams, intervals, k, tol, method, out):
    """Correct a stereo depth map with a simulated sparse LiDAR"""
    depth_path = scene_path(depth, scene, frame_id, "stereo_depth", option="--depth")
    calib_path = scene_path(calib, scene, frame_id, "calib")
    velodyne_path = scene_path(velodyne, scene, frame_id, "velodyne")
    if out is None:
        if scene is None:
            raise PlidarCliError("Give --out or --scene")
        out = Path(scene) / SETTINGS.corrected_dir / f"{frame_id}.png"
    selection = beam_selection(beams, intervals)

    z_map = read_depth_png(depth_path)
    kitti_calib = read_calib(calib_path)
    scan = read_velodyne(velodyne_path)

    if method == "gdc":
        result = gdc_pipeline(
            z_map, kitti_calib.camera, scan, selection, k=k, tol=tol, extrinsics=kitti_calib.extrinsics
        )
    else:
        lidar_cam = lidar_to_camera(sparsify(scan, selection), kitti_calib.extrinsics)
        result = replace_landmarks(z_map, match_landmarks(lidar_cam, z_map, kitti_calib.camera))

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_depth_png(out, result.depth_map)
    logger.info(
        f"{result.status.value}: {result.n_landmarks} landmarks, {result.n_free} free points,"
        f" residual {result.residual} after {result.iterations} iterations, wrote {out}"
    )
    return ReturnCodes.SUCCESS if result.converged else ReturnCodes.NOT_CONVERGED
