import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import bin_points
from splatloc.errors import EmptyScene, FormatError, SamplingExhausted
from splatloc.lie import RigidTransform
from splatloc.proximity import (
    OCCLUSION_SLACK,
    FrameVoxelSet,
    VoxelGrid,
    default_voxel_size,
    grid_from_rle,
    grid_to_rle,
    iou3d,
    load_grid_rle,
    sample_pose_at_iou,
    save_grid_rle,
    visible_voxels,
    voxelize_scene,
)
from splatloc.render import Camera
from splatloc.scene import GaussianScene, covariance_world, SynthSpec, default_intrinsics, synth_room


def points_scene(centers, opacity=0.9):
    n = len(centers)
    q = np.tile([1.0, 0, 0, 0], (n, 1))
    return GaussianScene(np.asarray(centers, float), np.full((n, 3), 0.05), q, np.full(n, opacity),
                         np.zeros((n, 1, 3)))


def test_single_and_shared_cell():
    assert len(voxelize_scene(points_scene([[1.0, 2.0, 3.0]]), 0.1).occupied) == 1
    g = voxelize_scene(points_scene([[0.0, 0.0, 0.0], [0.01, 0.02, 0.03], [0.5, 0.5, 0.5]]), 0.1)
    # the first two share a cell; the third sits in the far corner
    assert len(g.occupied) == 2


def test_low_opacity_not_occupied():
    s = GaussianScene(np.array([[0, 0, 0], [1.0, 1, 1]]), np.full((2, 3), 0.1), np.tile([1.0, 0, 0, 0], (2, 1)),
                      np.array([0.4, 0.6]), np.zeros((2, 1, 3)))
    g = voxelize_scene(s, 0.25)
    assert list(g.occupied) == [int(np.ravel_multi_index((4, 4, 4), g.shape))]


def test_empty_scene():
    with pytest.raises(EmptyScene):
        voxelize_scene(points_scene(np.zeros((0, 3))))


def test_room_matches_binning_oracle(room):
    scene, _ = room
    g = voxelize_scene(scene)
    assert g.voxel_size == pytest.approx(default_voxel_size(scene))
    pts = scene.centers[scene.opacities >= 0.5]
    assert set(g.occupied.tolist()) == bin_points(pts.tolist(), g.origin.tolist(), g.voxel_size, g.shape)
    assert np.all(g.contains(scene.centers))


def test_visible_subset_of_occupied(room):
    scene, cams = room
    g = voxelize_scene(scene)
    for cam in cams[:5]:
        for occl in (True, False):
            v = visible_voxels(cam, g, scene, occl)
            assert len(v) > 0 and np.all(np.isin(v.indices, g.occupied))
        assert set(visible_voxels(cam, g, scene).indices) <= set(visible_voxels(cam, g, scene, False).indices)


def _look(eye, target, w=160, h=120, f=100.0):
    return Camera(f, f, w / 2, h / 2, w, h, RigidTransform.look_at(np.asarray(eye, float), np.asarray(target, float)))


def test_facing_away_is_empty():
    xs, ys = np.meshgrid(np.linspace(-1, 1, 20), np.linspace(-1, 1, 20))
    wall = points_scene(np.column_stack([xs.ravel(), ys.ravel(), np.full(400, 5.0)]))
    g = voxelize_scene(wall, 0.1)
    assert len(visible_voxels(_look([0, 0, 0], [0, 0, -1]), g, wall)) == 0


def test_whole_wall_in_frustum_is_visible():
    xs, ys = np.meshgrid(np.linspace(-1, 1, 20), np.linspace(-1, 1, 20))
    wall = points_scene(np.column_stack([xs.ravel(), ys.ravel(), np.full(400, 5.0)]))
    g = voxelize_scene(wall, 0.1)
    v = visible_voxels(_look([0, 0, 0], [0, 0, 1]), g, wall)
    assert np.array_equal(v.indices, g.occupied)


def opaque_blobs(scene):
    """Means, inverse covariances, Mahalanobis limits and reach of Gaussians with opacity >= 0.5."""
    keep = np.flatnonzero(scene.opacities >= 0.5)
    inv = np.linalg.inv(np.stack([covariance_world(scene[i]) for i in keep]))
    # o * exp(-m/2) >= 0.5  <=>  m <= 2 ln(2 o)
    return scene.centers[keep], inv, 2 * np.log(2 * scene.opacities[keep]), 2 * scene.scales[keep].max(axis=1)


def ray_march_visible(blobs, eye, target, slack):
    """Visible iff no Gaussian is at least half opaque anywhere on the segment from
    the eye to ``target``, stopping ``slack`` short of it. Marches in 3D against
    the Gaussians directly, independent of the rasterizer and its depth map."""
    mu, inv, limit, reach = blobs
    d = target - eye
    dist = np.linalg.norm(d)
    # only Gaussians within reach of the segment can matter
    s = np.clip((mu - eye) @ d / dist**2, 0, 1)
    near = np.linalg.norm(eye + s[:, None] * d - mu, axis=1) < reach
    mu, inv, limit = mu[near], inv[near], limit[near]
    for s in np.arange(0.01, dist - slack, 0.01):
        diff = eye + d * (s / dist) - mu
        if np.any(np.einsum("ni,nij,nj->n", diff, inv, diff) <= limit):
            return False
    return True


def test_pillar_occlusion_against_ray_march():
    spec = SynthSpec(n_clutter=0, n_pillars=1, n_base=1)
    scene, _ = synth_room(spec, 3)
    pillar = scene.centers[-1][:2]
    eye = np.array([0.3 * spec.size[0] if pillar[0] > spec.size[0] / 2 else 0.7 * spec.size[0],
                    0.3 * spec.size[1] if pillar[1] > spec.size[1] / 2 else 0.7 * spec.size[1], 1.2])
    eye[:2] = pillar + 1.2 * (eye[:2] - pillar) / np.linalg.norm(eye[:2] - pillar)
    fx, fy, cx, cy = default_intrinsics(spec)
    cam = Camera(fx, fy, cx, cy, spec.width, spec.height,
                 RigidTransform.look_at(eye, np.array([pillar[0], pillar[1], 1.2])))
    g = voxelize_scene(scene)
    frustum = visible_voxels(cam, g, scene, occlusion=False).indices
    visible = set(visible_voxels(cam, g, scene).indices.tolist())
    centers = g.origin + (np.column_stack(np.unravel_index(frustum, g.shape)) + 0.5) * g.voxel_size
    slack = OCCLUSION_SLACK * g.voxel_size
    blobs = opaque_blobs(scene)
    oracle = np.array([ray_march_visible(blobs, eye, c, slack) for c in centers])
    assert np.sum(~oracle) > 50  # the pillar really hides part of the far wall
    ours = np.array([f in visible for f in frustum.tolist()])
    # pixel rounding of the projected centers flips a few voxels on shadow edges
    assert np.mean(ours == oracle) > 0.95


def test_iou_examples():
    a = FrameVoxelSet.of(range(30))
    b = FrameVoxelSet.of(range(20, 50))
    assert iou3d(a, b) == pytest.approx(10 / 50)
    assert iou3d(a, a) == 1.0
    assert iou3d(a, FrameVoxelSet.of(range(100, 110))) == 0.0
    assert iou3d(FrameVoxelSet.of([]), FrameVoxelSet.of([])) == 0.0


sets = st.sets(st.integers(0, 200), max_size=60).map(FrameVoxelSet.of)


@given(sets, sets)
def test_iou_symmetric_and_bounded(a, b):
    assert iou3d(a, b) == iou3d(b, a)
    assert 0.0 <= iou3d(a, b) <= 1.0
    if len(a):
        assert iou3d(a, a) == 1.0


@given(sets, sets)
def test_union_never_decreases_iou(a, b):
    assert iou3d(a.union(b), b) >= iou3d(a, b)


def test_sampling_hits_level(room):
    scene, cams = room
    g = voxelize_scene(scene)
    target = visible_voxels(cams[3], g, scene)
    cam = sample_pose_at_iou(cams[3], 0.4, 0.025, g, scene, np.random.default_rng(7))
    assert 0.375 <= iou3d(visible_voxels(cam, g, scene), target) <= 0.425
    again = sample_pose_at_iou(cams[3], 0.4, 0.025, g, scene, np.random.default_rng(7))
    assert np.array_equal(cam.pose.R, again.pose.R) and np.array_equal(cam.pose.t, again.pose.t)


def test_sampling_near_one_gives_near_identity(room):
    scene, cams = room
    g = voxelize_scene(scene)
    cam = sample_pose_at_iou(cams[1], 0.99, 0.01, g, scene, np.random.default_rng(0))
    assert np.linalg.norm(cam.pose.camera_center() - cams[1].pose.camera_center()) < 0.1


def test_sampling_exhausted(room):
    scene, cams = room
    g = voxelize_scene(scene)
    with pytest.raises(SamplingExhausted):
        # an irrational level is never a ratio of voxel counts
        sample_pose_at_iou(cams[0], np.pi / 10, 0.0, g, scene, np.random.default_rng(0), budget=20)
    with pytest.raises(ValueError):
        sample_pose_at_iou(cams[0], 1.0, 0.01, g, scene, np.random.default_rng(0))


def test_rle_round_trip(tmp_path, room):
    g = voxelize_scene(room[0])
    save_grid_rle(g, tmp_path / "g.voxr")
    back = load_grid_rle(tmp_path / "g.voxr")
    assert np.array_equal(back.occupancy, g.occupancy)
    assert np.array_equal(back.origin, g.origin) and back.voxel_size == g.voxel_size
    full = VoxelGrid(np.zeros(3), 1.0, np.ones((2, 2, 2), bool))
    assert np.array_equal(grid_from_rle(grid_to_rle(full)).occupancy, full.occupancy)


def test_rle_errors(room):
    data = grid_to_rle(voxelize_scene(room[0]))
    with pytest.raises(FormatError) as e:
        grid_from_rle(b"XXXX" + data[4:])
    assert e.value.offset == 0
    with pytest.raises(FormatError):
        grid_from_rle(data[:10])
    with pytest.raises(FormatError):
        grid_from_rle(data[:-4])
    with pytest.raises(FormatError):
        grid_from_rle(data + b"\x00")
