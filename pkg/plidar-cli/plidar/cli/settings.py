from typing import Dict, Tuple

from pydantic import Field

from plidar.core.settings import PlidarSettings


class PlidarCLISettings(PlidarSettings):
    corrected_dir: str = Field(
        "corrected_2", description="Scene subdirectory the correct command writes to"
    )
    svg_size: Tuple[float, float] = Field(
        (6.4, 3.6), description="Width and height of error charts in inches"
    )
    demo_scene: Dict = Field(
        {
            "objects": [
                {"x": -2.0, "z": 12.0, "width": 4.0, "height": 3.0, "depth_bias": 2.0},
                {"x": 6.0, "z": 30.0, "width": 6.0, "height": 4.0, "texture_seed": 1},
            ],
            "ground": {"texture_seed": 2},
            "noise_sigma": 0.05,
        },
        description="Scene written by synth when no scene file is given",
    )
