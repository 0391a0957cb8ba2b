"""SE(3)/SO(3) arithmetic and analytic pose Jacobians.

Conventions used throughout the package:

* A pose ``T = (R, t)`` maps world points into the camera frame,
  ``x_c = R @ x_w + t``.
* Tangent vectors are ordered ``xi = (rho, phi)``: translation first, rotation
  second.
* Perturbations are left-multiplicative, ``T <- exp(xi) @ T``. Every Jacobian
  below is the derivative at ``xi = 0`` under that convention.
* The 9-vector form of a rotation stacks its columns, ``vec(R) = [r1; r2; r3]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi

_SMALL_ANGLE = 1e-8
_SERIES_ANGLE = 1e-3


def skew(v) -> np.ndarray:
    """Return the 3x3 matrix ``v^`` with ``v^ @ w == cross(v, w)``."""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _so3_coeffs(theta: float) -> tuple[float, float, float]:
    """A = sin(t)/t, B = (1 - cos t)/t^2, C = (t - sin t)/t^3."""
    if theta < _SMALL_ANGLE:
        return 1.0, 0.5, 1.0 / 6.0
    half = 0.5 * theta
    a = np.sin(theta) / theta
    b = 0.5 * (np.sin(half) / half) ** 2
    if theta < _SERIES_ANGLE:
        t2 = theta * theta
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        c = (theta - np.sin(theta)) / theta**3
    return a, b, c


def exp_so3(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    a, b, _ = _so3_coeffs(theta)
    k = skew(phi)
    return np.eye(3) + a * k + b * (k @ k)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Principal-branch rotation vector of ``R``.

    Raises AngleNearPi when the rotation angle exceeds ``pi - 1e-6``.
    """
    R = np.asarray(R, dtype=np.float64)
    w = 0.5 * vee(R - R.T)  # sin(theta) * axis
    s = float(np.linalg.norm(w))
    c = 0.5 * (np.trace(R) - 1.0)
    theta = float(np.arctan2(s, c))
    if theta > np.pi - 1e-6:
        raise AngleNearPi(f"rotation angle {theta:.9f} too close to pi")
    if theta < _SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    return w * (theta / s)


def left_jacobian_so3(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    theta = float(np.linalg.norm(phi))
    _, b, c = _so3_coeffs(theta)
    k = skew(phi)
    return np.eye(3) + b * k + c * (k @ k)


@dataclass(frozen=True)
class RigidTransform:
    """World-to-camera rigid transform ``x_c = R x_w + t``."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> RigidTransform:
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.t
        return m

    def __matmul__(self, other: RigidTransform) -> RigidTransform:
        return RigidTransform(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> RigidTransform:
        Rt = self.R.T
        return RigidTransform(Rt, -Rt @ self.t)

    def apply(self, points) -> np.ndarray:
        """Transform points of shape (3,) or (N, 3)."""
        return np.asarray(points, dtype=np.float64) @ self.R.T + self.t

    def camera_center(self) -> np.ndarray:
        """Camera center in world coordinates, ``-R^T t``."""
        return -self.R.T @ self.t

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
        """Camera at ``eye`` looking at ``target``; camera axes x right, y down, z forward."""
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=np.float64))
        n = np.linalg.norm(x)
        if n < 1e-9:
            x = np.cross(z, np.array([1.0, 0.0, 0.0]))
            n = np.linalg.norm(x)
        x /= n
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        return cls(R, -R @ eye)


def exp_se3(xi) -> RigidTransform:
    xi = np.asarray(xi, dtype=np.float64)
    rho, phi = xi[:3], xi[3:]
    return RigidTransform(exp_so3(phi), left_jacobian_so3(phi) @ rho)


def log_se3(T: RigidTransform) -> np.ndarray:
    phi = log_so3(T.R)
    rho = np.linalg.solve(left_jacobian_so3(phi), T.t)
    return np.concatenate([rho, phi])


def retract(T: RigidTransform, xi) -> RigidTransform:
    """Apply a left perturbation ``exp(xi) @ T``."""
    return exp_se3(xi) @ T


def rotation_angle(R: np.ndarray) -> float:
    """Geodesic angle of a rotation in radians (valid on the full [0, pi])."""
    s = np.linalg.norm(0.5 * vee(R - R.T))
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


# -- analytic Jacobians -----------------------------------------------------


def d_mu_c_d_pose(mu_c) -> np.ndarray:
    """3x6 Jacobian of a camera-frame point w.r.t. the pose: ``[I, -mu_c^]``."""
    return np.hstack([np.eye(3), -skew(mu_c)])


def d_camcenter_d_pose(T: RigidTransform) -> np.ndarray:
    """3x6 Jacobian of the camera center ``-R^T t`` w.r.t. the pose.

    Under a left perturbation the center moves by ``-R^T rho`` and is
    unaffected by the rotational part, giving ``[-R^T, 0]``.
    """
    return np.hstack([-T.R.T, np.zeros((3, 3))])


def d_rotation_d_pose(R: np.ndarray) -> np.ndarray:
    """9x6 Jacobian of ``vec(R)`` (column stacking) w.r.t. the pose.

    Row block j is ``[0, -r_j^]`` with ``r_j`` the j-th column of R.
    """
    R = np.asarray(R, dtype=np.float64)
    out = np.zeros((9, 6))
    for j in range(3):
        out[3 * j : 3 * j + 3, 3:] = -skew(R[:, j])
    return out


def vec_columns(R: np.ndarray) -> np.ndarray:
    """Stack the columns of a 3x3 matrix into a 9-vector."""
    return np.asarray(R).T.reshape(9)


# -- quaternions (w, x, y, z) ------------------------------------------------


def quat_to_rotation(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_rotations(q: np.ndarray) -> np.ndarray:
    """Batched version of :func:`quat_to_rotation` for an (N, 4) array."""
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def rotation_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion with non-negative w for a rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R)
    diag = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        s = 2.0 * np.sqrt(1.0 + tr)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif k == 1:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif k == 2:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def d_phi_d_quat(q) -> np.ndarray:
    """3x4 map from a quaternion increment to the left rotation increment.

    For unit ``q = (w, v)`` and ``R(q + dq) = exp(phi^) R(q)`` to first order,
    ``phi = 2 (-v dw + (w I + v^) dv)``. The radial direction ``dq = q`` maps
    to zero, which matches the normalisation inside :func:`quat_to_rotation`.
    """
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    w, v = q[0] / n, q[1:] / n
    return (2.0 / n) * np.hstack([-v[:, None], w * np.eye(3) + skew(v)])
