"""Camera localization against 3D Gaussian splat maps by photometric alignment."""

from .lie import RigidTransform, exp_se3, log_se3
from .optimize import (
    BlurSchedule,
    LocalizationResult,
    OptimizerConfig,
    coarse_to_fine_localize,
    localize,
    localize_quat_trans,
    two_step_localize,
)
from .proximity import iou3d, sample_pose_at_iou, visible_voxels, voxelize_scene
from .render import Camera, render, render_with_pose_grad
from .retrieval import build_database, compute_descriptor, extend_with_renderings, topk
from .scene import GaussianScene, SynthSpec, load_scene, save_scene, synth_room

__version__ = "0.1.0"

__all__ = [
    "RigidTransform", "exp_se3", "log_se3",
    "BlurSchedule", "LocalizationResult", "OptimizerConfig", "coarse_to_fine_localize", "localize",
    "localize_quat_trans", "two_step_localize",
    "iou3d", "sample_pose_at_iou", "visible_voxels", "voxelize_scene",
    "Camera", "render", "render_with_pose_grad",
    "build_database", "compute_descriptor", "extend_with_renderings", "topk",
    "GaussianScene", "SynthSpec", "load_scene", "save_scene", "synth_room",
]
