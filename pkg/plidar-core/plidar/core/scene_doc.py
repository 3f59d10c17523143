from datetime import datetime
from typing import Dict, Optional

from pydantic import BaseModel, Field

from plidar.core.evaluation import BinnedErrorReport, binned_median_error
from plidar.core.gdc import CorrectedDepth
from plidar.core.geometry import DepthMap
from plidar.core.utils import CorrectionStatus


class SceneCorrectionDoc(BaseModel):
    """
    Outcome of correcting one scene frame with sparse LiDAR
    """

    scene_id: str = Field(..., description="The scene_id of the corrected scene")
    frame_id: str = Field("000000", description="Frame of the scene that was corrected")
    last_updated: datetime = Field(
        description="Last updated date for this document",
        default_factory=datetime.utcnow,
    )
    status: CorrectionStatus = Field(..., description="Outcome of the correction solve")
    converged: bool = Field(..., description="Whether the solve met its tolerance")
    beams: str = Field(..., description="Beam preset, or custom, the LiDAR was reduced to")
    k: Optional[int] = Field(None, description="Neighborhood size after clamping")
    n_landmarks: int = Field(0, description="Pseudo-LiDAR points pinned to LiDAR depths")
    n_free: int = Field(0, description="Points solved for")
    n_unreached: int = Field(0, description="Points in components without a landmark")
    iterations: int = Field(0, description="Solver iterations")
    residual: Optional[float] = Field(None, description="Final |(I - W) Z'|")
    initial_residual: Optional[float] = Field(None, description="|(I - W) Z'| at the warm start")
    stage_counts: Dict[str, int] = Field({}, description="Point counts of every pipeline stage")
    before: Optional[BinnedErrorReport] = Field(
        None, description="Binned error of the stereo depth against the true depth"
    )
    after: Optional[BinnedErrorReport] = Field(
        None, description="Binned error of the corrected depth against the true depth"
    )
    corrected_depth: Optional[str] = Field(None, description="Path of the corrected depth PNG")

    class Config:
        use_enum_values = True

    @classmethod
    def from_result(
        cls,
        scene_id: str,
        result: CorrectedDepth,
        beams: str,
        stereo: Optional[DepthMap] = None,
        truth: Optional[DepthMap] = None,
        **kwargs,
    ) -> "SceneCorrectionDoc":
        """
        Summarizes a correction, with before/after error reports when the true depth is known

        Args:
            scene_id: identifier of the scene
            result: the correction to summarize
            beams: name of the beam selection used
            stereo: the depth map that was corrected
            truth: true depth of the frame
        """
        reports = {}
        if truth is not None:
            if stereo is not None:
                reports["before"] = binned_median_error(stereo, truth)
            reports["after"] = binned_median_error(result.depth_map, truth)

        return cls(
            scene_id=scene_id,
            status=result.status,
            converged=result.converged,
            beams=beams,
            k=result.stage_counts.get("k"),
            n_landmarks=result.n_landmarks,
            n_free=result.n_free,
            n_unreached=result.n_unreached,
            iterations=result.iterations,
            residual=result.residual,
            initial_residual=result.initial_residual,
            stage_counts=result.stage_counts,
            **reports,
            **kwargs,
        )
