from pathlib import Path
from typing import Optional

from maggma.builders import MapBuilder
from maggma.core import Store

from plidar.core import SETTINGS
from plidar.core.gdc import gdc_pipeline
from plidar.core.kitti import (
    SceneFiles,
    read_calib,
    read_depth_png,
    read_velodyne,
    write_depth_png,
)
from plidar.core.lidar import BeamSelection
from plidar.core.scene_doc import SceneCorrectionDoc


class DepthCorrectionBuilder(MapBuilder):
    def __init__(
        self,
        scenes: Store,
        corrections: Store,
        beams: str = SETTINGS.DEFAULT_BEAMS,
        k: int = SETTINGS.KNN_K,
        tol: float = SETTINGS.GDC_TOL,
        corrected_dir: Optional[str] = "corrected_2",
        **kwargs,
    ):
        """
        Corrects the stereo depth of every scene with its sparsified LiDAR scan

        Args:
            scenes: Store of scene documents with a scene_dir and optionally a
                frame_id, beams, intervals, k or tol overriding the builder's
            corrections: Store of SceneCorrectionDocs
            beams: beam preset used when a scene names none
            k: neighborhood size of the KNN graph
            tol: relative residual tolerance of the correction solve
            corrected_dir: scene subdirectory the corrected depth PNG is written to,
                None to skip writing it
        """
        self.scenes = scenes
        self.corrections = corrections
        self.beams = beams
        self.k = k
        self.tol = tol
        self.corrected_dir = corrected_dir

        self.kwargs = kwargs

        super().__init__(
            source=scenes,
            target=corrections,
            projection=["scene_dir", "frame_id", "beams", "intervals", "k", "tol"],
            **kwargs,
        )

    def beam_selection(self, item):
        if item.get("intervals"):
            intervals = [tuple(i) for i in item["intervals"]]
            return "custom", BeamSelection(selected_intervals=intervals)
        beams = str(item.get("beams") or self.beams)
        return beams, BeamSelection.from_preset(beams)

    def unary_function(self, item):
        """
        Correct one scene frame and evaluate it against the true depth if there is one

        Args:
            item (dict): a (projection of a) scene document
        """
        scene_id = item[self.scenes.key]
        files = SceneFiles(root=Path(item["scene_dir"]), frame_id=item.get("frame_id") or "000000")
        beams, selection = self.beam_selection(item)
        self.logger.debug(f"Correcting {scene_id} frame {files.frame_id} with {beams} beams")

        stereo = read_depth_png(files.stereo_depth)
        calib = read_calib(files.calib)
        result = gdc_pipeline(
            stereo,
            calib.camera,
            read_velodyne(files.velodyne),
            selection,
            k=item.get("k") or self.k,
            tol=item.get("tol") or self.tol,
            extrinsics=calib.extrinsics,
        )
        if not result.converged:
            self.logger.warning(f"Correction of {scene_id} stopped after {result.iterations} iterations")

        corrected_path = None
        if self.corrected_dir is not None:
            corrected_path = files.root / self.corrected_dir / f"{files.frame_id}.png"
            corrected_path.parent.mkdir(parents=True, exist_ok=True)
            write_depth_png(corrected_path, result.depth_map)

        truth = read_depth_png(files.true_depth) if files.true_depth.exists() else None
        doc = SceneCorrectionDoc.from_result(
            scene_id,
            result,
            beams,
            stereo=stereo,
            truth=truth,
            frame_id=files.frame_id,
            corrected_depth=str(corrected_path) if corrected_path else None,
        )
        return doc.dict()
