from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..lie import RigidTransform


@dataclass(frozen=True)
class Camera:
    """Pinhole camera; ``pose`` maps world points into the camera frame.

    Pixel ``(u, v)`` has its center at integer coordinates, so the principal
    point of a W x H image is usually ``(W / 2, H / 2)``.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidTransform
    near: float = 0.2
    far: float = 50.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not 0 < self.near < self.far:
            raise ValueError("need 0 < near < far")
        if self.width < 8 or self.height < 8:
            raise ValueError("image must be at least 8x8")

    def with_pose(self, pose: RigidTransform) -> Camera:
        return replace(self, pose=pose)

    def scaled(self, factor: int) -> Camera:
        """Camera for an image downscaled by an integer ``factor``."""
        if factor == 1:
            return self
        w = max(8, int(round(self.width / factor)))
        h = max(8, int(round(self.height / factor)))
        sx, sy = w / self.width, h / self.height
        # pixel centers sit at integer coordinates, so u' + 0.5 = (u + 0.5) * s
        return replace(
            self, fx=self.fx * sx, fy=self.fy * sy,
            cx=(self.cx + 0.5) * sx - 0.5, cy=(self.cy + 0.5) * sy - 0.5, width=w, height=h,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def project(self, points_c: np.ndarray) -> np.ndarray:
        """Pinhole projection of camera-frame points, (N, 3) -> (N, 2)."""
        p = np.asarray(points_c, dtype=np.float64)
        z = p[..., 2]
        return np.stack([self.fx * p[..., 0] / z + self.cx, self.fy * p[..., 1] / z + self.cy], axis=-1)
