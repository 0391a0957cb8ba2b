"""Voxel-based 3D IoU between camera frames and sampling of poses at a given IoU."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyScene, FormatError, SamplingExhausted
from .lie import exp_se3
from .render import Camera, render_depth
from .scene import GaussianScene

OCCUPANCY_OPACITY = 0.5
DEPTH_ALPHA = 0.5
OCCLUSION_SLACK = 1.5  # in voxel sizes


@dataclass(frozen=True)
class VoxelGrid:
    """Dense occupancy grid; voxel ``(i, j, k)`` spans ``origin + [i, i+1) * voxel_size`` etc."""

    origin: np.ndarray
    voxel_size: float
    occupancy: np.ndarray  # bool, (nx, ny, nz)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    @property
    def occupied(self) -> np.ndarray:
        """Flat (C-order) indices of occupied voxels, ascending."""
        return np.flatnonzero(self.occupancy)

    @property
    def occupied_centers(self) -> np.ndarray:
        ijk = np.column_stack(np.unravel_index(self.occupied, self.shape))
        return self.origin + (ijk + 0.5) * self.voxel_size

    def upper(self) -> np.ndarray:
        return self.origin + np.asarray(self.shape) * self.voxel_size

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.origin) & (p < self.upper()), axis=1)


@dataclass(frozen=True)
class FrameVoxelSet:
    """Sorted flat indices of the occupied voxels visible from one camera."""

    indices: np.ndarray

    def __len__(self):
        return len(self.indices)

    def __contains__(self, flat_index) -> bool:
        i = np.searchsorted(self.indices, flat_index)
        return bool(i < len(self.indices) and self.indices[i] == flat_index)

    @classmethod
    def of(cls, indices) -> FrameVoxelSet:
        return cls(np.unique(np.fromiter(indices, dtype=np.int64)))

    def union(self, other: FrameVoxelSet) -> FrameVoxelSet:
        return FrameVoxelSet(np.union1d(self.indices, other.indices))


def default_voxel_size(scene: GaussianScene) -> float:
    lo, hi = scene.bounds()
    return float(np.linalg.norm(hi - lo)) / 64.0


def voxelize_scene(scene: GaussianScene, voxel_size: float | None = None) -> VoxelGrid:
    """Occupancy of every voxel holding a Gaussian center with opacity >= 0.5."""
    if len(scene) == 0:
        raise EmptyScene("cannot voxelize an empty scene")
    if voxel_size is None:
        voxel_size = default_voxel_size(scene)
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    lo, hi = scene.bounds()
    dims = np.floor((hi - lo) / voxel_size).astype(np.int64) + 1
    occ = np.zeros(tuple(dims), dtype=bool)
    pts = scene.centers[scene.opacities >= OCCUPANCY_OPACITY]
    ijk = np.minimum(np.floor((pts - lo) / voxel_size).astype(np.int64), dims - 1)
    occ[ijk[:, 0], ijk[:, 1], ijk[:, 2]] = True
    occ.setflags(write=False)
    return VoxelGrid(lo.copy(), float(voxel_size), occ)


def visible_voxels(cam: Camera, grid: VoxelGrid, scene: GaussianScene | None = None,
                   occlusion: bool = True, depth: np.ndarray | None = None) -> FrameVoxelSet:
    """Occupied voxels whose centers project into the image within [near, far].

    With ``occlusion`` a voxel also has to lie no more than 1.5 voxel sizes
    behind the depth map (nearest splat with alpha >= 0.5). Pixels the depth
    map leaves empty occlude nothing. ``depth`` may pass a precomputed map.
    """
    flat = grid.occupied
    pc = cam.pose.apply(grid.occupied_centers)
    z = pc[:, 2]
    ok = (z >= cam.near) & (z <= cam.far)
    zs = np.where(ok, z, 1.0)
    u = np.rint(cam.fx * pc[:, 0] / zs + cam.cx)
    v = np.rint(cam.fy * pc[:, 1] / zs + cam.cy)
    ok &= (u >= 0) & (u <= cam.width - 1) & (v >= 0) & (v <= cam.height - 1)
    if occlusion:
        if depth is None:
            if scene is None:
                raise ValueError("occlusion test needs the scene")
            depth = render_depth(scene, cam, DEPTH_ALPHA)
        ui = u[ok].astype(np.int64)
        vi = v[ok].astype(np.int64)
        front = depth[vi, ui]
        keep = z[ok] <= front + OCCLUSION_SLACK * grid.voxel_size
        sel = np.flatnonzero(ok)[keep]
    else:
        sel = np.flatnonzero(ok)
    return FrameVoxelSet(flat[sel])


def iou3d(a: FrameVoxelSet, b: FrameVoxelSet) -> float:
    """|a & b| / |a | b|, defined as 0 when both sets are empty."""
    inter = len(np.intersect1d(a.indices, b.indices, assume_unique=True))
    union = len(a) + len(b) - inter
    return inter / union if union else 0.0


def sample_pose_at_iou(target_cam: Camera, level: float, tolerance: float, grid: VoxelGrid,
                       scene: GaussianScene, rng: np.random.Generator,
                       budget: int = 10_000, occlusion: bool = True,
                       target_set: FrameVoxelSet | None = None) -> Camera:
    """Perturb ``target_cam`` until its frame IoU with the target is within ``tolerance`` of ``level``.

    Proposals are isotropic Gaussian tangent perturbations of scale ``s``
    (meters and radians alike). ``s`` is bisected on the sign of the IoU
    miss. The bracket is re-opened when it collapses, since single samples
    are noisy. Proposals whose camera center leaves the grid box are
    rejected outright.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if target_set is None:
        target_set = visible_voxels(target_cam, grid, scene, occlusion)
    if len(target_set) == 0:
        raise ValueError("target camera sees no occupied voxels")
    lo, hi = 0.0, None
    s = 0.1
    for _ in range(budget):
        xi = rng.normal(scale=s, size=6)
        cam = target_cam.with_pose(exp_se3(xi) @ target_cam.pose)
        if not grid.contains(cam.pose.camera_center())[0]:
            hi = s
        else:
            iou = iou3d(visible_voxels(cam, grid, scene, occlusion), target_set)
            if abs(iou - level) <= tolerance:
                return cam
            if iou > level:
                lo = s
            else:
                hi = s
        if hi is None:
            s = 2.0 * s
        else:
            if hi - lo < 0.02 * hi:
                lo, hi = 0.5 * lo, 1.5 * hi
            s = 0.5 * (lo + hi)
    raise SamplingExhausted(f"no pose within {tolerance} of IoU {level} after {budget} attempts")


# -- run-length encoded export ---------------------------------------------

_RLE_MAGIC = b"VOXR"
_RLE_HEADER = struct.Struct("<4sB3I4d")


def grid_to_rle(grid: VoxelGrid) -> bytes:
    """Header then alternating run lengths (u32), starting with an empty run, C order."""
    flat = grid.occupancy.ravel().astype(np.int8)
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds)
    if flat.size and flat[0]:
        runs = np.concatenate([[0], runs])
    head = _RLE_HEADER.pack(_RLE_MAGIC, 1, *grid.shape, *grid.origin, grid.voxel_size)
    return head + runs.astype("<u4").tobytes()


def grid_from_rle(data: bytes) -> VoxelGrid:
    if len(data) < _RLE_HEADER.size:
        raise FormatError("truncated voxel header", len(data))
    magic, version, nx, ny, nz, ox, oy, oz, size = _RLE_HEADER.unpack_from(data)
    if magic != _RLE_MAGIC:
        raise FormatError("bad voxel magic", 0)
    if version != 1:
        raise FormatError(f"unsupported voxel version {version}", 4)
    body = data[_RLE_HEADER.size:]
    if len(body) % 4:
        raise FormatError("voxel runs not a whole number of u32", _RLE_HEADER.size + len(body))
    runs = np.frombuffer(body, dtype="<u4").astype(np.int64)
    if runs.sum() != nx * ny * nz:
        raise FormatError("voxel runs do not cover the grid", _RLE_HEADER.size)
    values = np.arange(len(runs)) % 2 == 1
    occ = np.repeat(values, runs).reshape(nx, ny, nz)
    occ.setflags(write=False)
    return VoxelGrid(np.array([ox, oy, oz]), size, occ)


def save_grid_rle(grid: VoxelGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(grid_to_rle(grid))


def load_grid_rle(path) -> VoxelGrid:
    with open(path, "rb") as fh:
        return grid_from_rle(fh.read())
