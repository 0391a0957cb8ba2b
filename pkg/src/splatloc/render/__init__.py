from .blur import NO_BLUR, BlurSpec, blur, blur_adjoint
from .camera import Camera
from .imageio import read_pfm, read_png, write_pfm, write_png
from .pipeline import l1_loss, render, render_depth, render_structure, render_with_pose_grad
from .projection import (
    CULLED,
    DILATION,
    Splat2D,
    perspective_jacobian,
    project_gaussian,
    project_scene,
    transform_to_camera,
)
from .sh import sh_eval

__all__ = [
    "BlurSpec", "NO_BLUR", "blur", "blur_adjoint", "Camera", "read_pfm", "read_png",
    "write_pfm", "write_png", "l1_loss", "render", "render_depth", "render_structure", "render_with_pose_grad",
    "CULLED", "DILATION", "Splat2D", "perspective_jacobian", "project_gaussian",
    "project_scene", "transform_to_camera", "sh_eval",
]
