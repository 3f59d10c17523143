import logging
from functools import update_wrapper

import click

from plidar.cli.utils import PlidarCliError, ReturnCodes
from plidar.core.errors import PlidarError

logger = logging.getLogger("plidar")


def track(func):
    """decorator to log a command's outcome and exit with its return code"""

    def wrapper(*args, **kwargs):
        try:
            ret = func(*args, **kwargs)
        except PlidarError as e:
            raise PlidarCliError(f"{type(e).__name__}: {e}") from e

        ctx = click.get_current_context()
        if not isinstance(ret, ReturnCodes):
            raise PlidarCliError(f"`{ctx.command_path}` requires a ReturnCode!")

        logger.info(f"{ctx.command_path} exited with {ret.name}")
        ctx.exit(ret.value)

    return update_wrapper(wrapper, func)
