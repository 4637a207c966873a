"""swarmloc: stereo bounding-box triangulation for multi-drone 3D localization.

Detections from any stereo detector enter as normalized bounding-box label
files; the pipeline associates left/right boxes, triangulates depth from
centroid disparity, and back-projects to world coordinates. A built-in
analytic simulator generates datasets with exact ground truth for
evaluation and benchmarking.
"""

from .association import AssociationConfig, MatchedPair, associate, brute_force_associate
from .detection_io import (
    BoundingBox,
    DetectionSet,
    StereoFrame,
    centroid,
    parse_label_file,
    write_label_file,
)
from .evaluate import (
    ErrorRow,
    EvalSummary,
    bench_pipeline,
    depth_error_table,
    match_estimates_to_truth,
)
from .geometry import (
    CameraIntrinsics,
    ImagePoint,
    RigPose,
    Side,
    StereoRig,
    WorldPoint,
    back_project,
    depth_constant,
    disparity,
    project,
    quantization_depth_bound,
    triangulate_depth,
)
from .pipeline import DroneEstimate, FrameResult, localize_frame, localize_stream
from .simulate import GroundTruthRecord, NoiseModel, SceneConfig, emit_dataset, generate_scene

__version__ = "0.1.0"

__all__ = [
    "AssociationConfig",
    "BoundingBox",
    "CameraIntrinsics",
    "DetectionSet",
    "DroneEstimate",
    "ErrorRow",
    "EvalSummary",
    "FrameResult",
    "GroundTruthRecord",
    "ImagePoint",
    "MatchedPair",
    "NoiseModel",
    "RigPose",
    "SceneConfig",
    "Side",
    "StereoFrame",
    "StereoRig",
    "WorldPoint",
    "associate",
    "back_project",
    "bench_pipeline",
    "brute_force_associate",
    "centroid",
    "depth_constant",
    "depth_error_table",
    "disparity",
    "emit_dataset",
    "generate_scene",
    "localize_frame",
    "localize_stream",
    "match_estimates_to_truth",
    "parse_label_file",
    "project",
    "quantization_depth_bound",
    "triangulate_depth",
    "write_label_file",
]
