import logging
from pathlib import Path

import click
from monty.serialization import loadfn
from pydantic import ValidationError

from plidar.cli import SETTINGS
from plidar.cli.decorators import track
from plidar.cli.utils import PlidarCliError, ReturnCodes
from plidar.core.cost_volume import (
    build_disparity_volume,
    estimate_depth,
    remap_to_depth_volume,
    soft_argmax,
)
from plidar.core.geometry import disparity_to_depth
from plidar.core.kitti import (
    SceneFiles,
    dump_volume,
    read_calib,
    read_image,
    write_depth_png,
)
from plidar.core.synth import SceneSpec, render, save_scene
from plidar.core.utils import NoiseGrowth

logger = logging.getLogger("plidar")


@click.command()
@click.argument("scene_dir", type=click.Path(file_okay=False))
@click.option(
    "--spec",
    "spec_file",
    type=click.Path(exists=True, dir_okay=False),
    help="YAML or JSON scene description (built-in demo scene otherwise).",
)
@click.option("--frame-id", default="000000", show_default=True, help="Frame to write.")
@click.option("--seed", type=int, help="Override the scene seed.")
@click.option("--noise-sigma", type=float, help="Override the corruption noise in meters.")
@click.option(
    "--noise-growth",
    type=click.Choice([g.value for g in NoiseGrowth]),
    help="Override how corruption noise grows with depth.",
)
@click.option(
    "--block-matching",
    is_flag=True,
    help="Write block-matching stereo depth instead of the corrupted true depth.",
)
@track
def synth(scene_dir, spec_file, frame_id, seed, noise_sigma, noise_growth, block_matching):
    """Render a synthetic scene into a KITTI-like scene directory"""
    fields = dict(loadfn(spec_file) if spec_file else SETTINGS.demo_scene)
    overrides = {"seed": seed, "noise_sigma": noise_sigma, "noise_growth": noise_growth}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    try:
        spec = SceneSpec.parse_obj(fields)
    except ValidationError as e:
        raise PlidarCliError(f"Invalid scene description:\n{e}")

    scene = render(spec)
    stereo_depth = None
    if block_matching:
        stereo_depth = estimate_depth(
            scene.left, scene.right, spec.calib, max_disparity=spec.max_disparity
        )
    files = save_scene(scene_dir, spec, scene, stereo_depth=stereo_depth, frame_id=frame_id)
    logger.info(
        f"Wrote frame {frame_id} of a {spec.width}x{spec.height} scene with"
        f" {len(spec.surfaces)} surfaces and {len(scene.scan)} LiDAR returns to {files.root}"
    )
    return ReturnCodes.SUCCESS


@click.command()
@click.argument("scene_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--frame-id", default="000000", show_default=True, help="Frame to process.")
@click.option(
    "--method",
    type=click.Choice(["depth", "disparity"]),
    default="depth",
    show_default=True,
    help="Read out a remapped depth volume or the disparity volume.",
)
@click.option("--max-disparity", type=int, default=SETTINGS.MAX_DISPARITY, show_default=True)
@click.option("--window", type=int, default=SETTINGS.SAD_WINDOW, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    help="Depth PNG to write (the scene's stereo depth by default).",
)
@click.option(
    "--dump-volume",
    "volume_path",
    type=click.Path(dir_okay=False),
    help="Also write the raw score volume that was read out.",
)
@track
def stereo(scene_dir, frame_id, method, max_disparity, window, out, volume_path):
    """Estimate dense depth from the scene's rectified image pair"""
    files = SceneFiles(root=Path(scene_dir), frame_id=frame_id)
    calib = read_calib(files.calib).camera
    left, right = read_image(files.left_image), read_image(files.right_image)

    vol = build_disparity_volume(left, right, max_disparity=max_disparity, window=window)
    if method == "depth":
        vol = remap_to_depth_volume(vol, calib)
        z_map = soft_argmax(vol)
    else:
        z_map = disparity_to_depth(soft_argmax(vol), calib)

    if volume_path:
        dump_volume(volume_path, vol)
        logger.info(f"Wrote {vol.kind} volume of {vol.levels} levels to {volume_path}")

    out = Path(out) if out else files.stereo_depth
    out.parent.mkdir(parents=True, exist_ok=True)
    write_depth_png(out, z_map)
    logger.info(f"Wrote {z_map.n_valid} valid stereo depths to {out}")
    return ReturnCodes.SUCCESS
