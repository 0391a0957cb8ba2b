"""Global image descriptors, a posed-image database and its extension with renderings.

The descriptor is a blurred 8x8 color thumbnail, mean-subtracted and
L2-normalized. It is a deterministic stand-in for a learned global descriptor.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AngleNearPi, FormatError, ImageTooSmall, SamplingExhausted
from .lie import RigidTransform, exp_se3, log_se3
from .proximity import VoxelGrid, visible_voxels, voxelize_scene
from .render import Camera, render
from .render.blur import blur_matrix
from .render.resample import area_matrix
from .scene import GaussianScene

THUMB = 8
CAPTURED = "captured"
RENDERED = "rendered"
_SOURCES = (CAPTURED, RENDERED)


def compute_descriptor(img: np.ndarray) -> np.ndarray:
    """192-vector for an H x W x 3 image; all zeros for a uniform image."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    if h < THUMB or w < THUMB:
        raise ImageTooSmall(f"image {w}x{h} is smaller than {THUMB}x{THUMB}")
    # blur with sigma of half a thumbnail cell so the thumbnail is not aliased
    sy, sx = 0.5 * h / THUMB, 0.5 * w / THUMB
    By = blur_matrix(h, 2 * int(3 * sy) + 1, sy)
    Bx = blur_matrix(w, 2 * int(3 * sx) + 1, sx)
    Ay = area_matrix(h, THUMB) @ By
    Ax = area_matrix(w, THUMB) @ Bx
    thumb = np.einsum("ih,hwc,jw->ijc", Ay, img, Ax)
    v = thumb.ravel()
    v = v - v.mean()
    n = np.linalg.norm(v)
    if n < 1e-12:
        return np.zeros_like(v)
    return v / n


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; the zero descriptor matches only itself."""
    za, zb = not np.any(a), not np.any(b)
    if za or zb:
        return 1.0 if za and zb else 0.0
    return float(a @ b)


@dataclass(frozen=True)
class DbEntry:
    descriptor: np.ndarray
    pose: RigidTransform
    source: str


@dataclass(frozen=True)
class RetrievalDatabase:
    entries: tuple = ()
    dim: int = 3 * THUMB * THUMB
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for e in self.entries:
            if e.descriptor.shape != (self.dim,):
                raise ValueError(f"descriptor of shape {e.descriptor.shape}, expected ({self.dim},)")
            if e.source not in _SOURCES:
                raise ValueError(f"unknown source {e.source!r}")

    def __len__(self):
        return len(self.entries)

    @cached_property
    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dim))
        return np.stack([e.descriptor for e in self.entries])

    def with_entries(self, new) -> RetrievalDatabase:
        return RetrievalDatabase(self.entries + tuple(new), self.dim, dict(self.metadata))

    def count(self, source: str) -> int:
        return sum(e.source == source for e in self.entries)


def build_database(images, poses, metadata=None, source: str = CAPTURED) -> RetrievalDatabase:
    entries = tuple(DbEntry(compute_descriptor(im), p, source) for im, p in zip(images, poses))
    return RetrievalDatabase(entries, metadata=dict(metadata or {}))


def topk(db: RetrievalDatabase, query_desc: np.ndarray, k: int = 5) -> list:
    """The ``k`` most similar entries as ``(pose, similarity)``, ties in insertion order."""
    if len(db) == 0:
        raise ValueError("empty database")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query_desc, dtype=np.float64)
    if not np.any(q):
        sims = np.array([1.0 if not np.any(d) else 0.0 for d in db.matrix])
    else:
        sims = db.matrix @ q
    order = np.argsort(-sims, kind="stable")[:k]
    return [(db.entries[i].pose, float(sims[i])) for i in order]


# -- extension with rendered keyframes --------------------------------------


@dataclass(frozen=True)
class SamplerSpec:
    """How virtual keyframes are drawn.

    A fraction ``interp_fraction`` interpolates between consecutive captured
    poses with jitter. The rest are free-space samples inside the voxel grid
    box. Both kinds must see at least ``min_visible`` occupied voxels.
    """

    n: int = 200
    interp_fraction: float = 0.5
    jitter_trans: float = 0.15
    jitter_rot: float = 0.15
    margin: float = 0.4
    pitch_range: tuple[float, float] = (-0.3, 0.15)
    min_visible: int = 150
    max_attempts: int = 100


def _interpolated(rng, poses, spec: SamplerSpec):
    i = int(rng.integers(len(poses)))
    a, b = poses[i], poses[(i + 1) % len(poses)]
    try:
        rel = log_se3(b @ a.inverse())
    except AngleNearPi:
        return None
    s = rng.uniform()
    jitter = np.concatenate([rng.normal(scale=spec.jitter_trans, size=3),
                             rng.normal(scale=spec.jitter_rot, size=3)])
    return exp_se3(jitter) @ exp_se3(s * rel) @ a


def _free_space(rng, grid: VoxelGrid, spec: SamplerSpec):
    lo = grid.origin + spec.margin
    hi = grid.upper() - spec.margin
    if np.any(hi <= lo):
        return None
    eye = rng.uniform(lo, hi)
    yaw = rng.uniform(0, 2 * np.pi)
    pitch = rng.uniform(*spec.pitch_range)
    d = np.array([np.cos(yaw) * np.cos(pitch), np.sin(yaw) * np.cos(pitch), np.sin(pitch)])
    return RigidTransform.look_at(eye, eye + d)


def extend_with_renderings(db: RetrievalDatabase, scene: GaussianScene, sampler_spec: SamplerSpec,
                           rng: np.random.Generator, cam: Camera,
                           grid: VoxelGrid | None = None) -> RetrievalDatabase:
    """New database with ``sampler_spec.n`` rendered keyframes appended.

    ``cam`` supplies the intrinsics used for rendering. Interpolation uses
    the captured entries in insertion order.
    """
    if sampler_spec.n == 0:
        return db
    if grid is None:
        grid = voxelize_scene(scene)
    captured = [e.pose for e in db.entries if e.source == CAPTURED]
    n_interp = int(round(sampler_spec.n * sampler_spec.interp_fraction)) if len(captured) >= 2 else 0
    new = []
    for j in range(sampler_spec.n):
        for _ in range(sampler_spec.max_attempts):
            pose = _interpolated(rng, captured, sampler_spec) if j < n_interp else _free_space(rng, grid, sampler_spec)
            if pose is None or not grid.contains(pose.camera_center())[0]:
                continue
            c = cam.with_pose(pose)
            if len(visible_voxels(c, grid, scene)) >= sampler_spec.min_visible:
                new.append(DbEntry(compute_descriptor(render(scene, c)), pose, RENDERED))
                break
        else:
            raise SamplingExhausted(f"no valid virtual keyframe after {sampler_spec.max_attempts} attempts")
    return db.with_entries(new)


# -- persistence ---------------------------------------------------------------

_DB_MAGIC = b"SLDB"
_DB_HEADER = struct.Struct("<4sBIII")  # magic, version, dim, count, metadata length


def database_to_bytes(db: RetrievalDatabase) -> bytes:
    meta = json.dumps(db.metadata, sort_keys=True).encode()
    rec = np.dtype([("desc", "<f8", (db.dim,)), ("R", "<f8", (9,)), ("t", "<f8", (3,)), ("source", "u1")])
    arr = np.zeros(len(db), dtype=rec)
    for i, e in enumerate(db.entries):
        arr[i] = (e.descriptor, e.pose.R.ravel(), e.pose.t, _SOURCES.index(e.source))
    return _DB_HEADER.pack(_DB_MAGIC, 1, db.dim, len(db), len(meta)) + meta + arr.tobytes()


def database_from_bytes(data: bytes) -> RetrievalDatabase:
    if len(data) < _DB_HEADER.size:
        raise FormatError("truncated database header", len(data))
    magic, version, dim, count, meta_len = _DB_HEADER.unpack_from(data)
    if magic != _DB_MAGIC:
        raise FormatError("bad database magic", 0)
    if version != 1:
        raise FormatError(f"unsupported database version {version}", 4)
    off = _DB_HEADER.size
    try:
        metadata = json.loads(data[off:off + meta_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad metadata: {exc}", off) from None
    off += meta_len
    rec = np.dtype([("desc", "<f8", (dim,)), ("R", "<f8", (9,)), ("t", "<f8", (3,)), ("source", "u1")])
    if len(data) != off + count * rec.itemsize:
        raise FormatError(f"expected {count} records of {rec.itemsize} bytes", off)
    arr = np.frombuffer(data, dtype=rec, count=count, offset=off)
    entries = []
    for i, r in enumerate(arr):
        if r["source"] >= len(_SOURCES):
            raise FormatError(f"bad source tag {r['source']}", off + i * rec.itemsize + rec.itemsize - 1)
        entries.append(DbEntry(r["desc"].copy(), RigidTransform(r["R"].reshape(3, 3).copy(), r["t"].copy()),
                               _SOURCES[r["source"]]))
    return RetrievalDatabase(tuple(entries), dim, metadata)


def save_database(db: RetrievalDatabase, path) -> None:
    with open(path, "wb") as fh:
        fh.write(database_to_bytes(db))


def load_database(path) -> RetrievalDatabase:
    with open(path, "rb") as fh:
        return database_from_bytes(fh.read())
