import logging
from enum import Enum
from pathlib import Path
from typing import Optional

from plidar.core.kitti import SceneFiles

logger = logging.getLogger("plidar")


class PlidarCliError(Exception):
    pass


class ReturnCodes(Enum):
    """process exit codes of plidar commands"""

    SUCCESS = 0
    ERROR = 1
    NOT_CONVERGED = 2


def scene_path(
    explicit: Optional[str],
    scene: Optional[str],
    frame_id: str,
    attribute: str,
    option: Optional[str] = None,
) -> Path:
    """
    An explicitly given file, or the file of that role in a scene directory

    option names the command line option of the explicit file, --<attribute> by default
    """
    if explicit:
        return Path(explicit)
    if scene is None:
        option = option or f"--{attribute.replace('_', '-')}"
        raise PlidarCliError(f"Give {option} or --scene")
    return getattr(SceneFiles(root=Path(scene), frame_id=frame_id), attribute)
