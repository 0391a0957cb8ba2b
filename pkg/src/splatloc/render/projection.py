"""World -> camera -> image mapping of 3D Gaussians (single and batched)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BehindCamera
from ..lie import RigidTransform
from ..scene import Gaussian3D, GaussianScene, covariance_world
from .camera import Camera
from .raster import ALPHA_MIN
from .sh import eval_colors

DILATION = 0.3  # pixels^2 added to every projected covariance
GUARD_BAND = 1.3  # affine Jacobian evaluated no further out than 1.3x the half image extent


@dataclass(frozen=True)
class Splat2D:
    mean: np.ndarray
    cov: np.ndarray
    depth: float
    view_color: np.ndarray
    eff_opacity: float


class _Culled:
    def __repr__(self):
        return "CULLED"


CULLED = _Culled()


def transform_to_camera(g: Gaussian3D, T: RigidTransform):
    """Mean and covariance of ``g`` in the camera frame."""
    mu_c = T.R @ np.asarray(g.center, dtype=np.float64) + T.t
    cov_c = T.R @ covariance_world(g) @ T.R.T
    return mu_c, cov_c


def perspective_jacobian(mu_c, cam: Camera) -> np.ndarray:
    x, y, z = np.asarray(mu_c, dtype=np.float64)
    if z < cam.near:
        raise BehindCamera(f"depth {z} is in front of the near plane {cam.near}")
    return np.array(
        [[cam.fx / z, 0.0, -cam.fx * x / (z * z)], [0.0, cam.fy / z, -cam.fy * y / (z * z)]]
    )


def _guard_limits(cam: Camera):
    lim_x = GUARD_BAND * 0.5 * cam.width / cam.fx
    lim_y = GUARD_BAND * 0.5 * cam.height / cam.fy
    return lim_x, lim_y


def clamped_jacobian(mu_c, cam: Camera) -> np.ndarray:
    """Projection Jacobian with x/z, y/z clamped to the guard band.

    Identical to :func:`perspective_jacobian` for centers projecting within
    1.3x the image half-extent. Further out the lateral terms are frozen, which
    stops splats grazing the near plane from exploding into full-image blobs.
    """
    x, y, z = np.asarray(mu_c, dtype=np.float64)
    if z < cam.near:
        raise BehindCamera(f"depth {z} is in front of the near plane {cam.near}")
    lim_x, lim_y = _guard_limits(cam)
    tx = np.clip(x / z, -lim_x, lim_x) * z
    ty = np.clip(y / z, -lim_y, lim_y) * z
    return perspective_jacobian((tx, ty, z), cam)


def footprint_radius(cov2d: np.ndarray, opacity) -> np.ndarray:
    """Pixel radius outside which a splat's alpha is guaranteed below 1/255.

    Never smaller than the 3-sigma extent along the major axis.
    """
    a, b, c = cov2d[..., 0, 0], cov2d[..., 0, 1], cov2d[..., 1, 1]
    mid = 0.5 * (a + c)
    lam = mid + np.sqrt(np.maximum(mid * mid - (a * c - b * b), 0.0))
    k2 = 2.0 * np.log(np.maximum(np.asarray(opacity) / ALPHA_MIN, 1.0))
    return np.sqrt(lam) * np.maximum(3.0, np.sqrt(k2))


def project_gaussian(g: Gaussian3D, cam: Camera):
    """Splat2D for one Gaussian, or CULLED when it cannot touch the image."""
    from .sh import sh_eval

    mu_c, cov_c = transform_to_camera(g, cam.pose)
    if not cam.near <= mu_c[2] <= cam.far:
        return CULLED
    J = clamped_jacobian(mu_c, cam)
    cov2d = J @ cov_c @ J.T + DILATION * np.eye(2)
    mean = np.array([cam.fx * mu_c[0] / mu_c[2] + cam.cx, cam.fy * mu_c[1] / mu_c[2] + cam.cy])
    if g.opacity <= ALPHA_MIN:
        return CULLED
    r = float(footprint_radius(cov2d, g.opacity))
    if mean[0] + r < 0 or mean[0] - r > cam.width - 1 or mean[1] + r < 0 or mean[1] - r > cam.height - 1:
        return CULLED
    d = np.asarray(g.center) - cam.pose.camera_center()
    color = np.clip(sh_eval(g.sh_coeffs, d / np.linalg.norm(d)), 0.0, 1.0)
    return Splat2D(mean, cov2d, float(mu_c[2]), color, float(g.opacity))


@dataclass
class Projected:
    """Depth-sorted splats of one scene/camera pair plus what backward needs."""

    index: np.ndarray  # original Gaussian index per splat
    mu_c: np.ndarray
    J: np.ndarray
    cov_c: np.ndarray
    cov_w: np.ndarray
    means2d: np.ndarray
    conic: np.ndarray  # (a, b, c) of the inverse 2D covariance
    cov2d: np.ndarray
    colors: np.ndarray
    color_free: np.ndarray  # False where the color was clamped, per channel
    dirs: np.ndarray
    dist: np.ndarray
    opacity: np.ndarray
    bbox: np.ndarray
    jac_free: np.ndarray  # (n, 2) False where the guard band froze x/z or y/z

    def __len__(self):
        return len(self.index)


def project_scene(scene: GaussianScene, cam: Camera) -> Projected:
    R, t = cam.pose.R, cam.pose.t
    mu_c_all = scene.centers @ R.T + t
    z_all = mu_c_all[:, 2]
    keep = (z_all >= cam.near) & (z_all <= cam.far) & (scene.opacities > ALPHA_MIN)
    idx = np.nonzero(keep)[0]
    mu_c = mu_c_all[idx]
    cov_w = scene.covariances()[idx]
    x, y, z = mu_c[:, 0], mu_c[:, 1], mu_c[:, 2]
    lim_x, lim_y = _guard_limits(cam)
    free_x = np.abs(x / z) <= lim_x
    free_y = np.abs(y / z) <= lim_y
    tx = np.where(free_x, x, np.clip(x / z, -lim_x, lim_x) * z)
    ty = np.where(free_y, y, np.clip(y / z, -lim_y, lim_y) * z)
    n = len(idx)
    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = cam.fx / z
    J[:, 0, 2] = -cam.fx * tx / (z * z)
    J[:, 1, 1] = cam.fy / z
    J[:, 1, 2] = -cam.fy * ty / (z * z)
    cov_c = R @ cov_w @ R.T
    cov2d = J @ cov_c @ J.transpose(0, 2, 1)
    cov2d[:, 0, 0] += DILATION
    cov2d[:, 1, 1] += DILATION
    means2d = np.column_stack([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])
    opac = scene.opacities[idx]
    r = footprint_radius(cov2d, opac)
    inside = (
        (means2d[:, 0] + r >= 0)
        & (means2d[:, 0] - r <= cam.width - 1)
        & (means2d[:, 1] + r >= 0)
        & (means2d[:, 1] - r <= cam.height - 1)
    )
    sel = np.nonzero(inside)[0]
    idx, mu_c, cov_w, J, cov_c, cov2d, means2d, opac, r, free_x, free_y = (
        a[sel] for a in (idx, mu_c, cov_w, J, cov_c, cov2d, means2d, opac, r, free_x, free_y)
    )
    order = np.lexsort((idx, mu_c[:, 2]))
    idx, mu_c, cov_w, J, cov_c, cov2d, means2d, opac, r, free_x, free_y = (
        a[order] for a in (idx, mu_c, cov_w, J, cov_c, cov2d, means2d, opac, r, free_x, free_y)
    )
    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] ** 2
    conic = np.column_stack([cov2d[:, 1, 1] / det, -cov2d[:, 0, 1] / det, cov2d[:, 0, 0] / det])

    v = scene.centers[idx] - cam.pose.camera_center()
    dist = np.linalg.norm(v, axis=1)
    dirs = v / dist[:, None]
    raw = eval_colors(scene.sh[idx], dirs, scene.sh_degree)
    colors = np.clip(raw, 0.0, 1.0)
    color_free = (raw > 0.0) & (raw < 1.0)
    bbox = np.column_stack([means2d[:, 0] - r, means2d[:, 0] + r, means2d[:, 1] - r, means2d[:, 1] + r])
    return Projected(
        idx, mu_c, J, cov_c, cov_w, means2d, conic, cov2d, colors, color_free, dirs, dist, opac,
        bbox, np.column_stack([free_x, free_y]),
    )
