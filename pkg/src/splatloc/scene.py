"""Gaussian scene representation, binary file format and synthetic rooms.

Scenes are stored as a struct of arrays: ``centers (N, 3)``, ``scales (N, 3)``,
``quats (N, 4)`` in (w, x, y, z) order, ``opacities (N,)`` and spherical
harmonic coefficients ``sh (N, K, 3)`` with ``K = (degree + 1) ** 2``.

Binary layout (all little-endian)::

    offset  size  field
    0       4     magic b"SPLT"
    4       1     version (1)
    5       1     sh_degree (0, 1 or 2)
    6       2     reserved, zero
    8       4     gaussian count N (uint32)
    12      24    background RGB (3 x float64)
    36      ...   N packed records: center 3f8, scale 3f8, quat 4f8,
                  opacity f8, sh K*3 f8 (coefficient-major, RGB inner)
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidSpec
from .lie import RigidTransform, quat_to_rotation, quats_to_rotations

SH_C0 = 0.28209479177387814
MAGIC = b"SPLT"
VERSION = 1
_HEADER = struct.Struct("<4sBBHI3d")


def sh_coeff_count(degree: int) -> int:
    return (degree + 1) ** 2


def _record_dtype(degree: int) -> np.dtype:
    k = sh_coeff_count(degree)
    return np.dtype(
        [
            ("center", "<f8", (3,)),
            ("scale", "<f8", (3,)),
            ("quat", "<f8", (4,)),
            ("opacity", "<f8"),
            ("sh", "<f8", (k, 3)),
        ]
    )


@dataclass(frozen=True)
class Gaussian3D:
    center: np.ndarray
    scale: np.ndarray
    orient: np.ndarray
    opacity: float
    sh_coeffs: np.ndarray


def covariance_world(g: Gaussian3D) -> np.ndarray:
    """World covariance ``R(q) diag(scale^2) R(q)^T``."""
    R = quat_to_rotation(g.orient)
    return (R * np.asarray(g.scale, dtype=np.float64) ** 2) @ R.T


def _readonly(a, dtype=np.float64) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianScene:
    centers: np.ndarray
    scales: np.ndarray
    quats: np.ndarray
    opacities: np.ndarray
    sh: np.ndarray
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sh_degree: int = 0

    def __post_init__(self):
        n = len(self.centers)
        k = sh_coeff_count(self.sh_degree)
        object.__setattr__(self, "centers", _readonly(self.centers).reshape(n, 3))
        object.__setattr__(self, "scales", _readonly(self.scales).reshape(n, 3))
        object.__setattr__(self, "quats", _readonly(self.quats).reshape(n, 4))
        object.__setattr__(self, "opacities", _readonly(self.opacities).reshape(n))
        object.__setattr__(self, "sh", _readonly(self.sh).reshape(n, k, 3))
        object.__setattr__(self, "background", _readonly(self.background).reshape(3))
        if self.sh_degree not in (0, 1, 2):
            raise ValueError(f"sh_degree must be 0, 1 or 2, got {self.sh_degree}")

    def __len__(self) -> int:
        return len(self.centers)

    def __getitem__(self, i: int) -> Gaussian3D:
        return Gaussian3D(
            self.centers[i], self.scales[i], self.quats[i], float(self.opacities[i]), self.sh[i]
        )

    @classmethod
    def from_gaussians(cls, gaussians, background=(0.0, 0.0, 0.0), sh_degree: int = 0):
        k = sh_coeff_count(sh_degree)
        gaussians = list(gaussians)
        if not gaussians:
            z = np.zeros((0, 3))
            return cls(z, z, np.zeros((0, 4)), np.zeros(0), np.zeros((0, k, 3)), background, sh_degree)
        return cls(
            np.array([g.center for g in gaussians]),
            np.array([g.scale for g in gaussians]),
            np.array([g.orient for g in gaussians]),
            np.array([g.opacity for g in gaussians]),
            np.array([np.reshape(g.sh_coeffs, (k, 3)) for g in gaussians]),
            background,
            sh_degree,
        )

    def covariances(self) -> np.ndarray:
        return self._cov_world

    @cached_property
    def _cov_world(self) -> np.ndarray:
        R = quats_to_rotations(self.quats)
        cov = np.einsum("nij,nj,nkj->nik", R, self.scales**2, R)
        cov.setflags(write=False)
        return cov

    def validate(self) -> None:
        """Raise ValueError when any Gaussian violates its invariants."""
        if np.any(self.scales <= 0):
            raise ValueError("scales must be positive")
        if np.any(np.abs(np.linalg.norm(self.quats, axis=1) - 1.0) > 1e-6):
            raise ValueError("quaternions must be unit length")
        if np.any((self.opacities <= 0) | (self.opacities >= 1)):
            raise ValueError("opacities must lie in (0, 1)")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.centers.min(axis=0), self.centers.max(axis=0)

    def equals(self, other: GaussianScene) -> bool:
        """Bit-exact equality of every field."""
        return (
            self.sh_degree == other.sh_degree
            and all(
                np.array_equal(a, b) and a.tobytes() == b.tobytes()
                for a, b in (
                    (self.centers, other.centers),
                    (self.scales, other.scales),
                    (self.quats, other.quats),
                    (self.opacities, other.opacities),
                    (self.sh, other.sh),
                    (self.background, other.background),
                )
            )
        )


# -- serialisation -----------------------------------------------------------


def scene_to_bytes(scene: GaussianScene) -> bytes:
    dt = _record_dtype(scene.sh_degree)
    rec = np.empty(len(scene), dtype=dt)
    rec["center"] = scene.centers
    rec["scale"] = scene.scales
    rec["quat"] = scene.quats
    rec["opacity"] = scene.opacities
    rec["sh"] = scene.sh
    header = _HEADER.pack(MAGIC, VERSION, scene.sh_degree, 0, len(scene), *scene.background)
    return header + rec.tobytes()


def scene_from_bytes(data: bytes) -> GaussianScene:
    if len(data) < _HEADER.size:
        raise FormatError("truncated header", len(data))
    magic, version, degree, _reserved, count, *bg = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if degree not in (0, 1, 2):
        raise FormatError(f"invalid sh_degree {degree}", 5)
    dt = _record_dtype(degree)
    expected = _HEADER.size + count * dt.itemsize
    if len(data) < expected:
        whole = (len(data) - _HEADER.size) // dt.itemsize
        raise FormatError(
            f"truncated record {whole} of {count}", _HEADER.size + whole * dt.itemsize
        )
    if len(data) > expected:
        raise FormatError("trailing bytes after last record", expected)
    rec = np.frombuffer(data, dtype=dt, count=count, offset=_HEADER.size)
    bad = (
        np.any(rec["scale"] <= 0, axis=1)
        | (np.abs(np.linalg.norm(rec["quat"], axis=1) - 1.0) > 1e-6)
        | (rec["opacity"] <= 0)
        | (rec["opacity"] >= 1)
        | ~np.all(np.isfinite(rec["center"]), axis=1)
    )
    if np.any(bad):
        i = int(np.argmax(bad))
        raise FormatError(f"record {i} violates Gaussian invariants", _HEADER.size + i * dt.itemsize)
    return GaussianScene(
        rec["center"], rec["scale"], rec["quat"], rec["opacity"], rec["sh"], np.array(bg), degree
    )


def save_scene(scene: GaussianScene, path) -> None:
    Path(path).write_bytes(scene_to_bytes(scene))


def load_scene(path) -> GaussianScene:
    return scene_from_bytes(Path(path).read_bytes())


def scene_to_json(scene: GaussianScene) -> str:
    """Human-readable dump for debugging; not a round-trip format."""
    doc = {
        "sh_degree": scene.sh_degree,
        "background": scene.background.tolist(),
        "gaussians": [
            {
                "center": scene.centers[i].tolist(),
                "scale": scene.scales[i].tolist(),
                "quat": scene.quats[i].tolist(),
                "opacity": float(scene.opacities[i]),
                "sh": scene.sh[i].tolist(),
            }
            for i in range(len(scene))
        ],
    }
    return json.dumps(doc, indent=1)


def export_json(scene: GaussianScene, path) -> None:
    Path(path).write_text(scene_to_json(scene))


# -- synthetic rooms ---------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a procedural box room. Lengths in meters."""

    size: tuple[float, float, float] = (4.0, 3.5, 2.5)
    tile_spacing: float = 0.15
    n_clutter: int = 10
    n_pillars: int = 0
    n_base: int = 60
    sh_degree: int = 1
    texture: str = "tiles"  # or "stripes"
    stripe_period: float = 0.3
    width: int = 240
    height: int = 135
    hfov_deg: float = 70.0
    background: tuple[float, float, float] = (0.05, 0.05, 0.05)

    def validate(self) -> None:
        if min(self.size) <= 0 or self.tile_spacing <= 0:
            raise InvalidSpec("room dimensions and tile spacing must be positive")
        if self.n_clutter < 0 or self.n_pillars < 0 or self.n_base < 0:
            raise InvalidSpec("counts must be non-negative")
        if self.width < 8 or self.height < 8 or not 10.0 < self.hfov_deg < 170.0:
            raise InvalidSpec("invalid image size or field of view")
        if self.texture not in ("tiles", "stripes"):
            raise InvalidSpec(f"unknown texture {self.texture!r}")
        if self.sh_degree not in (0, 1, 2):
            raise InvalidSpec("sh_degree must be 0, 1 or 2")
        if min(self.size) < 1.0:
            raise InvalidSpec("room must be at least 1 m in every dimension")


def _basis_quat(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Quaternion of the rotation whose columns are (u, v, u x v)."""
    from .lie import rotation_to_quat

    return rotation_to_quat(np.stack([u, v, np.cross(u, v)], axis=1))


def _smooth_field(rng: np.random.Generator, n_waves: int = 4, max_freq: float = 1.2):
    """Random low-frequency RGB field over 3D points, values roughly in [-1, 1]."""
    k = rng.normal(size=(n_waves, 3))
    k *= (rng.uniform(0.4, max_freq, size=n_waves) * 2 * np.pi / np.linalg.norm(k, axis=1))[:, None]
    phase = rng.uniform(0, 2 * np.pi, size=(n_waves, 3))
    amp = rng.uniform(0.5, 1.0, size=(n_waves, 3)) / np.sqrt(n_waves)

    def _eval(p: np.ndarray) -> np.ndarray:
        arg = (p @ k.T)[:, :, None] + phase[None]  # (n, waves, 3)
        return np.sum(amp[None] * np.sin(arg), axis=1)

    return _eval


def _surface_tiles(size, spacing):
    """Tile centers and in-plane axes for the six faces of the box room."""
    sx, sy, sz = size
    faces = []
    e = np.eye(3)
    # (fixed axis, fixed value, in-plane axis a, in-plane axis b)
    for axis, value in ((0, 0.0), (0, sx), (1, 0.0), (1, sy), (2, 0.0), (2, sz)):
        a, b = [i for i in range(3) if i != axis]
        na = max(1, int(round(size[a] / spacing)))
        nb = max(1, int(round(size[b] / spacing)))
        ga = (np.arange(na) + 0.5) * size[a] / na
        gb = (np.arange(nb) + 0.5) * size[b] / nb
        A, B = np.meshgrid(ga, gb, indexing="ij")
        pts = np.zeros((A.size, 3))
        pts[:, axis] = value
        pts[:, a] = A.ravel()
        pts[:, b] = B.ravel()
        faces.append((pts, e[a], e[b], size[a] / na, size[b] / nb, axis))
    return faces


def wall_tile_count(spec: SynthSpec) -> int:
    return sum(len(f[0]) for f in _surface_tiles(spec.size, spec.tile_spacing))


def synth_room(spec: SynthSpec, rng_seed: int):
    """Build a textured box room and a base camera trajectory inside it.

    Returns ``(scene, cameras)``. The room spans ``[0, size]`` on each axis
    with z up. Walls, floor and ceiling are tiled with flat Gaussians; clutter
    objects are small Gaussian clusters near the walls, pillars are vertical
    stacks of Gaussians.
    """
    spec.validate()
    rng = np.random.default_rng(rng_seed)
    size = np.asarray(spec.size, dtype=np.float64)
    field_lo = _smooth_field(rng, 4, 0.8)
    field_mid = _smooth_field(rng, 6, 2.5)
    surface_base = rng.uniform(0.25, 0.75, size=(6, 3))

    centers, scales, quats, colors, opac = [], [], [], [], []
    for fi, (pts, ea, eb, da, db, _) in enumerate(_surface_tiles(spec.size, spec.tile_spacing)):
        n = len(pts)
        centers.append(pts)
        sa, sb = 0.6 * da, 0.6 * db
        scales.append(np.tile([sa, sb, 0.01 * min(da, db) / 0.15], (n, 1)))
        quats.append(np.tile(_basis_quat(ea, eb), (n, 1)))
        if spec.texture == "stripes":
            # high-contrast stripes over a low-frequency colour wash
            coord = pts @ ea  # horizontal on walls
            stripe = np.where(np.floor(coord / (0.5 * spec.stripe_period)) % 2 == 0, 1.0, -1.0)
            base = surface_base[fi] + 0.2 * field_lo(pts)
            c = base + 0.3 * stripe[:, None]
        else:
            c = surface_base[fi] + 0.22 * field_lo(pts) + 0.12 * field_mid(pts)
            c += rng.normal(scale=0.05, size=(n, 3))
        colors.append(c)
        opac.append(np.full(n, 0.92))

    margin = 0.45
    for _ in range(spec.n_clutter):
        # an object: cluster of blobs resting on the floor near a wall
        side = rng.integers(4)
        anchor = rng.uniform([margin, margin, 0.0], [size[0] - margin, size[1] - margin, 0.0])
        if side < 2:
            anchor[0] = rng.uniform(0.25, 0.6) if side == 0 else size[0] - rng.uniform(0.25, 0.6)
        else:
            anchor[1] = rng.uniform(0.25, 0.6) if side == 2 else size[1] - rng.uniform(0.25, 0.6)
        height = rng.uniform(0.3, 1.2)
        m = rng.integers(6, 14)
        body = rng.uniform(0.15, 0.85, size=3)
        p = anchor + rng.uniform([-0.2, -0.2, 0.05], [0.2, 0.2, height], size=(m, 3))
        centers.append(p)
        scales.append(rng.uniform(0.04, 0.12, size=(m, 3)))
        q = rng.normal(size=(m, 4))
        quats.append(q / np.linalg.norm(q, axis=1, keepdims=True))
        colors.append(np.clip(body + rng.normal(scale=0.12, size=(m, 3)), 0.05, 0.95))
        opac.append(rng.uniform(0.8, 0.97, size=m))

    for _ in range(spec.n_pillars):
        xy = rng.uniform(size[:2] * 0.3, size[:2] * 0.7)
        zs = np.arange(0.1, size[2], 0.1)
        m = len(zs)
        p = np.column_stack([np.full(m, xy[0]), np.full(m, xy[1]), zs])
        centers.append(p)
        scales.append(np.tile([0.12, 0.12, 0.07], (m, 1)))
        quats.append(np.tile([1.0, 0.0, 0.0, 0.0], (m, 1)))
        colors.append(np.tile(rng.uniform(0.1, 0.9, size=3), (m, 1)))
        opac.append(np.full(m, 0.97))

    centers = np.concatenate(centers)
    colors = np.clip(np.concatenate(colors), 0.02, 0.98)
    n = len(centers)
    k = sh_coeff_count(spec.sh_degree)
    sh = np.zeros((n, k, 3))
    sh[:, 0, :] = (colors - 0.5) / SH_C0
    if k > 1:
        sh[:, 1:, :] = rng.normal(scale=0.03, size=(n, k - 1, 3))
    scene = GaussianScene(
        centers,
        np.concatenate(scales),
        np.concatenate(quats),
        np.concatenate(opac),
        sh,
        np.asarray(spec.background, dtype=np.float64),
        spec.sh_degree,
    )
    cams = room_cameras(spec, spec.n_base, rng)
    return scene, cams


def default_intrinsics(spec: SynthSpec):
    fx = 0.5 * spec.width / np.tan(np.radians(spec.hfov_deg) / 2)
    return fx, fx, 0.5 * spec.width, 0.5 * spec.height


def room_cameras(spec: SynthSpec, n: int, rng: np.random.Generator, jitter: bool = True):
    """Cameras inside the room looking outward at the walls.

    Positions lie on an ellipse around the room center; headings sweep the
    full circle so the set covers every wall.
    """
    from .render.camera import Camera

    size = np.asarray(spec.size, dtype=np.float64)
    center = np.array([size[0] / 2, size[1] / 2, 0.0])
    fx, fy, cx, cy = default_intrinsics(spec)
    cams = []
    for i in range(n):
        yaw = 2 * np.pi * (i + (rng.uniform(-0.4, 0.4) if jitter else 0.0)) / max(n, 1)
        r = rng.uniform(0.1, 0.3)
        ang = yaw + np.pi + rng.uniform(-0.8, 0.8)
        eye = center + np.array([r * size[0] * np.cos(ang), r * size[1] * np.sin(ang), 0.0])
        eye[2] = rng.uniform(0.35, 0.6) * size[2]
        pitch = rng.uniform(-0.25, 0.1)
        d = np.array([np.cos(yaw) * np.cos(pitch), np.sin(yaw) * np.cos(pitch), np.sin(pitch)])
        pose = RigidTransform.look_at(eye, eye + d)
        cams.append(Camera(fx, fy, cx, cy, spec.width, spec.height, pose))
    return cams
