"""Forward rendering and the photometric-loss pose gradient."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, EmptyScene
from ..lie import d_camcenter_d_pose, d_rotation_d_pose, vec_columns
from ..scene import GaussianScene
from .blur import NO_BLUR, BlurSpec, blur, blur_adjoint
from .camera import Camera
from .projection import Projected, project_scene
from .raster import ALPHA_MIN, T_MIN, TILE, bin_tiles, raster_backward, raster_depth, raster_forward
from .sh import sh_basis_grad


def _check_scene(scene: GaussianScene) -> None:
    if len(scene) == 0:
        raise EmptyScene("cannot render a scene without Gaussians")


def _thresholds(cutoffs: bool):
    # Without cutoffs every splat inside its footprint blends and nothing terminates early.
    # The image then depends smoothly on the pose, which is useful for gradient checks.
    return (ALPHA_MIN, T_MIN) if cutoffs else (0.0, 0.0)


def _rasterize(proj: Projected, cam: Camera, bg: np.ndarray, cutoffs: bool = True):
    start, ids = bin_tiles(proj.bbox, cam.width, cam.height, TILE)
    a_min, t_min = _thresholds(cutoffs)
    img, final_t, last, n_contrib = raster_forward(
        proj.means2d, proj.conic, proj.colors, proj.opacity, start, ids,
        cam.width, cam.height, TILE, bg, a_min, t_min,
    )
    return img, (start, ids, final_t, last, n_contrib)


def render(scene: GaussianScene, cam: Camera, cutoffs: bool = True) -> np.ndarray:
    """Render an H x W x 3 float64 image in [0, 1].

    ``cutoffs=False`` disables the 1/255 alpha skip and early termination.
    """
    _check_scene(scene)
    proj = project_scene(scene, cam)
    img, _ = _rasterize(proj, cam, scene.background, cutoffs)
    return img


def render_structure(scene: GaussianScene, cam: Camera) -> tuple:
    """Discrete state of a render: splat order plus per-pixel contributor counts and ends.

    Two poses with equal structure lie on the same smooth piece of the image
    as a function of pose. The alpha skip, early termination, culling and depth
    sorting are the only sources of jumps, and each of them shows up here.
    """
    _check_scene(scene)
    proj = project_scene(scene, cam)
    _, (start, ids, _, last, n_contrib) = _rasterize(proj, cam, scene.background)
    return proj.index.tobytes(), start.tobytes(), n_contrib.tobytes(), last.tobytes()


def render_depth(scene: GaussianScene, cam: Camera, min_alpha: float = 0.5) -> np.ndarray:
    """Per-pixel depth of the nearest splat with alpha >= ``min_alpha`` (inf if none)."""
    _check_scene(scene)
    proj = project_scene(scene, cam)
    start, ids = bin_tiles(proj.bbox, cam.width, cam.height, TILE)
    return raster_depth(
        proj.means2d, proj.conic, proj.opacity, proj.mu_c[:, 2].copy(), start, ids,
        cam.width, cam.height, TILE, min_alpha,
    )


def l1_loss(rendered: np.ndarray, target: np.ndarray, spec: BlurSpec = NO_BLUR):
    """Mean absolute difference of the blurred images and its gradient w.r.t. ``rendered``."""
    r = blur(rendered, spec) - blur(target, spec)
    n = r.size
    loss = float(np.abs(r).sum() / n)
    grad = blur_adjoint(np.sign(r) / n, spec)  # sign(0) = 0: zero residual is stationary
    return loss, grad


def pose_grad_from_splats(proj: Projected, cam: Camera, scene: GaussianScene,
                          g_mean, g_conic, g_color) -> np.ndarray:
    """Chain per-splat gradients into the 6-vector left-perturbation gradient."""
    T = cam.pose
    R = T.R
    J, W, mu_c = proj.J, proj.cov_c, proj.mu_c
    z = mu_c[:, 2]

    # conic -> 2D covariance: dL/dSigma = -Q Gq Q with Gq the symmetric conic gradient
    a, b, c = proj.conic[:, 0], proj.conic[:, 1], proj.conic[:, 2]
    Q = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
    Gq = np.stack(
        [np.stack([g_conic[:, 0], 0.5 * g_conic[:, 1]], -1),
         np.stack([0.5 * g_conic[:, 1], g_conic[:, 2]], -1)], -2
    )
    G_cov2d = -Q @ Gq @ Q

    # Sigma_I = J W J^T: split into the J and W chains
    G_J = 2.0 * G_cov2d @ J @ W
    G_W = J.transpose(0, 2, 1) @ G_cov2d @ J

    fx, fy = cam.fx, cam.fy
    z2 = z * z
    # the mean itself is projected exactly; only the covariance sees the guard band
    g_mu = np.column_stack([
        g_mean[:, 0] * fx / z,
        g_mean[:, 1] * fy / z,
        -(g_mean[:, 0] * fx * mu_c[:, 0] + g_mean[:, 1] * fy * mu_c[:, 1]) / z2,
    ])
    # J02 = -fx tx / z^2 with tx = x inside the guard band, (x/z)_clamped * z outside
    fr_x, fr_y = proj.jac_free[:, 0], proj.jac_free[:, 1]
    j02, j12 = J[:, 0, 2], J[:, 1, 2]
    g_mu[:, 0] += np.where(fr_x, G_J[:, 0, 2] * (-fx / z2), 0.0)
    g_mu[:, 1] += np.where(fr_y, G_J[:, 1, 2] * (-fy / z2), 0.0)
    g_mu[:, 2] += (
        G_J[:, 0, 0] * (-fx / z2)
        + G_J[:, 0, 2] * np.where(fr_x, -2.0 * j02 / z, -j02 / z)
        + G_J[:, 1, 1] * (-fy / z2)
        + G_J[:, 1, 2] * np.where(fr_y, -2.0 * j12 / z, -j12 / z)
    )

    grad = np.zeros(6)
    # d mu_c / d xi = [I, -mu_c^]
    grad[:3] += g_mu.sum(axis=0)
    grad[3:] += np.cross(mu_c, g_mu).sum(axis=0)

    # W = R Sigma_w R^T  ->  dL/dR = 2 sum_n G_W R Sigma_w
    G_R = 2.0 * np.einsum("nij,jk,nkl->il", G_W, R, proj.cov_w)
    grad += d_rotation_d_pose(R).T @ vec_columns(G_R)

    if scene.sh_degree > 0:
        g_raw = g_color * proj.color_free
        sh = scene.sh[proj.index]
        bgrad = sh_basis_grad(proj.dirs, scene.sh_degree)
        g_dir = np.einsum("nc,nkc,nkj->nj", g_raw, sh, bgrad)
        d = proj.dirs
        # dir = v/|v|, v = mu_w - center  ->  dL/dcenter = -sum (I - d d^T) g_dir / |v|
        proj_g = g_dir - d * np.sum(d * g_dir, axis=1, keepdims=True)
        g_center = -(proj_g / proj.dist[:, None]).sum(axis=0)
        grad += d_camcenter_d_pose(T).T @ g_center
    return grad


def render_with_pose_grad(scene: GaussianScene, cam: Camera, target: np.ndarray,
                          blur_spec: BlurSpec = NO_BLUR, cutoffs: bool = True):
    """Render, compute the (blurred) L1 loss against ``target`` and its pose gradient.

    Returns ``(image, loss, grad)`` where ``image`` is the unblurred render and
    ``grad`` is d loss / d xi at xi = 0 for the perturbation ``exp(xi) @ pose``.
    """
    _check_scene(scene)
    if target.shape != (cam.height, cam.width, 3):
        raise DimensionMismatch(f"target shape {target.shape} != {(cam.height, cam.width, 3)}")
    proj = project_scene(scene, cam)
    img, (start, ids, final_t, last, _) = _rasterize(proj, cam, scene.background, cutoffs)
    loss, g_img = l1_loss(img, target, blur_spec)
    if len(proj) == 0:
        return img, loss, np.zeros(6)
    g_mean, g_conic, g_color = raster_backward(
        proj.means2d, proj.conic, proj.colors, proj.opacity, start, ids,
        cam.width, cam.height, TILE, scene.background, final_t, last, g_img,
        _thresholds(cutoffs)[0],
    )
    grad = pose_grad_from_splats(proj, cam, scene, g_mean, g_conic, g_color)
    return img, loss, grad
