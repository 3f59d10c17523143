import logging
import sys

import click

from plidar.cli.correction import correct_depth, sparsify_scan
from plidar.cli.evaluate import evaluate
from plidar.cli.scene import stereo, synth
from plidar.cli.utils import PlidarCliError, ReturnCodes

logger = logging.getLogger("")
CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])


@click.group(context_settings=CONTEXT_SETTINGS)
@click.option("--verbose", is_flag=True, help="Show debug messages.")
@click.version_option(package_name="plidar-cli")
def plidar(verbose):
    """Command line interface for stereo depth correction with sparse LiDAR"""
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def safe_entry_point():
    try:
        plidar()
    except PlidarCliError as e:
        click.secho(str(e), fg="red")
        sys.exit(ReturnCodes.ERROR.value)
    except Exception as e:
        logger.error(e, exc_info=True)
        sys.exit(ReturnCodes.ERROR.value)


plidar.add_command(synth)
plidar.add_command(stereo)
plidar.add_command(sparsify_scan)
plidar.add_command(correct_depth)
plidar.add_command(evaluate)
