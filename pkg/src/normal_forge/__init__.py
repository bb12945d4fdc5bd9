"""normal-forge: closed-form surface normals from depth, with synthetic
ground truth, an independent plane-fit oracle, evaluation metrics and a
geometric freespace baseline."""

from .camera import (
    CameraIntrinsics,
    DepthImage,
    DisparityImage,
    InverseDepthImage,
    backproject,
    depth_to_inverse,
    disparity_to_depth,
    project,
)
from .metrics import (
    AngularErrorMap,
    ConfusionCounts,
    SegmentationScores,
    aae,
    angular_error,
    colorize_angular_errors,
    confusion,
    normal_freespace,
    scores,
)
from .oracle import PlaneParams, oracle_normal_map, plane_fit
from .scenes import (
    BoxObstacle,
    GroundTruthBundle,
    PlaneScene,
    RoadScene,
    SphereScene,
    add_noise,
    default_road_scene,
    synth_plane,
    synth_road,
    synth_sphere,
    synthesize,
)
from .estimator import (
    CandidateNormal,
    SphericalDirection,
    GradientField,
    GradientFilter,
    NeighborhoodSpec,
    NormalMap,
    azimuth,
    candidate_normal,
    compute_gradients,
    estimate_normals,
    estimate_normals_from_disparity,
    inclination,
)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "DepthImage", "DisparityImage", "InverseDepthImage",
    "backproject", "project", "disparity_to_depth", "depth_to_inverse",
    "GradientFilter", "GradientField", "NeighborhoodSpec", "NormalMap",
    "SphericalDirection",
    "CandidateNormal", "compute_gradients", "candidate_normal", "azimuth",
    "inclination", "estimate_normals", "estimate_normals_from_disparity",
    "PlaneParams", "plane_fit", "oracle_normal_map",
    "PlaneScene", "SphereScene", "RoadScene", "BoxObstacle", "GroundTruthBundle",
    "synth_plane", "synth_sphere", "synth_road", "synthesize",
    "default_road_scene", "add_noise",
    "ConfusionCounts", "SegmentationScores", "AngularErrorMap",
    "angular_error", "aae", "confusion", "scores", "normal_freespace",
    "colorize_angular_errors",
    "__version__",
]
