import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splatloc.errors import FormatError, ImageTooSmall
from splatloc.lie import exp_se3
from splatloc.proximity import voxelize_scene
from splatloc.render import render
from splatloc.retrieval import (
    CAPTURED,
    RENDERED,
    DbEntry,
    RetrievalDatabase,
    SamplerSpec,
    build_database,
    compute_descriptor,
    database_from_bytes,
    database_to_bytes,
    extend_with_renderings,
    load_database,
    save_database,
    similarity,
    topk,
)


@pytest.fixture(scope="module")
def views(room):
    scene, cams = room
    small = [c.scaled(4) for c in cams[:12]]
    return scene, small, [render(scene, c) for c in small]


def test_uniform_image_is_zero_sentinel():
    d = compute_descriptor(np.full((20, 30, 3), 0.4))
    assert d.shape == (192,) and not np.any(d)
    assert similarity(d, d) == 1.0
    assert similarity(d, compute_descriptor(np.random.default_rng(0).uniform(size=(20, 30, 3)))) == 0.0


def test_copy_gives_identical_descriptor(views):
    img = views[2][0]
    a, b = compute_descriptor(img), compute_descriptor(img.copy())
    assert np.array_equal(a, b) and np.linalg.norm(a) == pytest.approx(1.0)


def test_brightness_robustness(views):
    for img in views[2]:
        d = compute_descriptor(img)
        # a gain cancels in the normalization; saturating it at 1 is a different change
        assert similarity(d, compute_descriptor(1.5 * img)) > 0.99
        for off in (-0.1, 0.1):
            assert abs(1.0 - similarity(d, compute_descriptor(np.clip(img + off, 0, 1)))) < 0.01


def test_image_too_small():
    with pytest.raises(ImageTooSmall):
        compute_descriptor(np.zeros((7, 100, 3)))


def test_query_identical_to_entry_ranks_first(views):
    _, cams, imgs = views
    db = build_database(imgs, [c.pose for c in cams])
    for i in (0, 5, 11):
        (pose, sim), *_ = topk(db, compute_descriptor(imgs[i]), 3)
        assert pose is cams[i].pose and sim == pytest.approx(1.0)
    assert len(topk(db, compute_descriptor(imgs[0]), 50)) == len(db)


def _random_db(rng, n, dim=6):
    pool = rng.normal(size=(4, dim))  # few distinct descriptors so ties happen
    entries = []
    for i in range(n):
        v = pool[rng.integers(4)] if rng.uniform() < 0.5 else rng.normal(size=dim)
        entries.append(DbEntry(v / np.linalg.norm(v), exp_se3([i, 0, 0, 0, 0, 0]), CAPTURED))
    return RetrievalDatabase(tuple(entries), dim)


@given(st.integers(0, 10_000), st.integers(1, 30), st.integers(1, 40))
def test_topk_matches_exhaustive_scan(seed, n, k):
    rng = np.random.default_rng(seed)
    db = _random_db(rng, n)
    q = db.entries[rng.integers(n)].descriptor if rng.uniform() < 0.5 else rng.normal(size=6)
    scored = sorted(((-float(e.descriptor @ q), i) for i, e in enumerate(db.entries)))[:k]
    got = topk(db, q, k)
    assert [p.t[0] for p, _ in got] == [float(i) for _, i in scored]
    assert np.allclose([s for _, s in got], [-s for s, _ in scored])


def test_topk_rejects_empty_and_bad_k(views):
    with pytest.raises(ValueError):
        topk(RetrievalDatabase(), np.ones(192))
    db = build_database(views[2][:2], [c.pose for c in views[1][:2]])
    with pytest.raises(ValueError):
        topk(db, np.ones(192), 0)


def test_extension(views):
    scene, cams, imgs = views
    db = build_database(imgs, [c.pose for c in cams], {"room": 0})
    assert extend_with_renderings(db, scene, SamplerSpec(n=0), np.random.default_rng(0), cams[0]) is db
    grid = voxelize_scene(scene)
    ext = extend_with_renderings(db, scene, SamplerSpec(n=50), np.random.default_rng(0), cams[0], grid)
    assert len(ext) == len(db) + 50
    assert ext.count(RENDERED) == 50 and all(e.source == RENDERED for e in ext.entries[len(db):])
    # the originals are untouched and kept in front
    assert ext.entries[:len(db)] == db.entries and len(db) == 12
    for e in ext.entries[len(db):]:
        assert grid.contains(e.pose.camera_center())[0]
    # a rendered entry's descriptor is that of its rendering
    e = ext.entries[-1]
    assert np.allclose(e.descriptor, compute_descriptor(render(scene, cams[0].with_pose(e.pose))))
    again = extend_with_renderings(db, scene, SamplerSpec(n=50), np.random.default_rng(0), cams[0], grid)
    assert np.array_equal(again.matrix, ext.matrix)


def test_database_round_trip(tmp_path, views):
    scene, cams, imgs = views
    db = build_database(imgs, [c.pose for c in cams], {"room": 0, "note": "x"})
    db = db.with_entries([DbEntry(np.zeros(192), exp_se3(np.full(6, 0.1)), RENDERED)])
    save_database(db, tmp_path / "db.bin")
    back = load_database(tmp_path / "db.bin")
    assert back.metadata == db.metadata and len(back) == len(db)
    assert np.array_equal(back.matrix, db.matrix)
    for a, b in zip(back.entries, db.entries):
        assert a.source == b.source
        assert np.array_equal(a.pose.R, b.pose.R) and np.array_equal(a.pose.t, b.pose.t)


def test_database_format_errors(views):
    data = database_to_bytes(build_database(views[2][:3], [c.pose for c in views[1][:3]]))
    with pytest.raises(FormatError) as e:
        database_from_bytes(b"NOPE" + data[4:])
    assert e.value.offset == 0
    for bad in (data[:5], data[:-1], data + b"\0"):
        with pytest.raises(FormatError):
            database_from_bytes(bad)
    corrupt = bytearray(data)
    corrupt[-1] = 9  # source tag of the last record
    with pytest.raises(FormatError) as e:
        database_from_bytes(bytes(corrupt))
    assert e.value.offset == len(data) - 1
