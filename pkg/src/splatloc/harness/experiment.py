"""Benchmark orchestration: IoU sweeps, retrieval-initialized localization, ablations.

Every run is identified by a key ``(scene, query, level, init)`` plus the
method variant and resolution scale. Random streams are seeded by hashing
the master seed with the key, so results do not depend on scheduling order,
worker count or which other runs share a sweep.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..errors import InvalidSpec, NoSuccessfulRuns, SamplingExhausted
from ..lie import RigidTransform, rotation_angle
from ..optimize import (
    BlurSchedule,
    OptimizerConfig,
    coarse_to_fine_localize,
    localize,
    two_step_localize,
)
from ..proximity import iou3d, sample_pose_at_iou, visible_voxels, voxelize_scene
from ..render import Camera, render
from ..render.resample import resize_area
from ..retrieval import SamplerSpec, build_database, compute_descriptor, extend_with_renderings, topk
from ..scene import SynthSpec, room_cameras, synth_room

METHODS = ("standard", "c2f", "two_step")
PARAMS = ("manifold", "quat_trans")
DEFAULT_LEVELS = tuple(round(float(x), 4) for x in np.linspace(0.05, 0.65, 10))


# -- specification -------------------------------------------------------------


def parse_variant(v: str) -> tuple[str, str]:
    method, _, param = v.partition(":")
    param = param or "manifold"
    if method not in METHODS or param not in PARAMS:
        raise InvalidSpec(f"unknown variant {v!r}; expected method:param from {METHODS} x {PARAMS}")
    return method, param


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that defines a benchmark run; serializable to JSON.

    ``scene_scale`` is meters per scene unit and converts translation errors
    to centimeters. Variants are ``"method:param"`` strings.
    """

    scene: SynthSpec = SynthSpec()
    scene_seeds: tuple = (0, 1)
    scene_scale: float = 1.0
    n_queries: int = 32
    iou_levels: tuple = DEFAULT_LEVELS
    inits_per_level: int = 16
    rot_deg: float = 5.0
    trans_cm: float = 5.0
    scales: tuple = (1,)
    variants: tuple = ("two_step:manifold",)
    master_seed: int = 0
    query_noise: float = 0.005
    iou_tolerance: float = 0.025
    occlusion: bool = True
    optimizer: OptimizerConfig = OptimizerConfig()
    blur: BlurSchedule = BlurSchedule()
    n_workers: int = 1
    n_render: int = 200
    top_k: int = 5

    def __post_init__(self):
        self.scene.validate()
        if not (self.rot_deg > 0 and self.trans_cm > 0):
            raise InvalidSpec("success thresholds must be positive")
        if not all(0.0 < lv < 1.0 for lv in self.iou_levels):
            raise InvalidSpec("IoU levels must lie in (0, 1)")
        if not self.scene_scale > 0:
            raise InvalidSpec("scene_scale must be positive")
        if self.n_queries < 0 or self.inits_per_level < 0 or self.n_render < 0:
            raise InvalidSpec("counts must be non-negative")
        if self.top_k < 1 or self.n_workers < 1:
            raise InvalidSpec("top_k and n_workers must be >= 1")
        if any(int(s) != s or s < 1 for s in self.scales):
            raise InvalidSpec("scales must be positive integers")
        for v in self.variants:
            parse_variant(v)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentSpec:
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown experiment fields: {sorted(extra)}")
        try:
            if "scene" in d:
                d["scene"] = _build(SynthSpec, d["scene"])
            if "optimizer" in d:
                d["optimizer"] = _build(OptimizerConfig, d["optimizer"])
            if "blur" in d:
                d["blur"] = _build(BlurSchedule, d["blur"])
            for k in ("scene_seeds", "iou_levels", "scales", "variants"):
                if k in d:
                    d[k] = tuple(d[k])
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(str(exc)) from None


def _build(cls, d: dict):
    if not isinstance(d, dict):
        raise InvalidSpec(f"{cls.__name__} must be a JSON object")
    known = {f.name for f in fields(cls)}
    extra = set(d) - known
    if extra:
        raise InvalidSpec(f"unknown {cls.__name__} fields: {sorted(extra)}")
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**d)


def load_spec(path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(json.loads(Path(path).read_text()))


def save_spec(spec: ExperimentSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


def run_seed(master: int, *key) -> int:
    """64-bit seed from the master seed and a run key, stable across processes."""
    text = "|".join(repr(k) for k in (master, *key))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def _rng(master: int, *key) -> np.random.Generator:
    return np.random.default_rng(run_seed(master, *key))


# -- records -------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    """One localization run. ``success`` is the threshold test, ``outcome`` the optimizer verdict.

    Runs whose initial pose could not be sampled carry an ``error`` starting
    with ``SamplingExhausted`` and are left out of success rates.
    """

    scene: int
    query: int
    level: float
    init: int
    method: str
    param: str
    scale: int
    init_iou: float
    init_rot_deg: float
    init_trans_cm: float
    rot_deg: float
    trans_cm: float
    success: bool
    outcome: str
    iterations: int
    final_psnr: float
    error: str = ""

    @property
    def counted(self) -> bool:
        return not self.error.startswith(SamplingExhausted.__name__)

    def sort_key(self):
        return (self.scene, self.query, self.level, self.init, self.method, self.param, self.scale)


_FIELDS = [f.name for f in fields(RunRecord)]
_TYPES = {f.name: f.type for f in fields(RunRecord)}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(name: str, s: str):
    t = _TYPES[name]
    if t == "bool":
        return s == "1"
    if t == "int":
        return int(s)
    if t == "float":
        return float(s)
    return s


def record_to_row(r: RunRecord) -> list[str]:
    return [_fmt(getattr(r, k)) for k in _FIELDS]


def record_from_row(row: dict) -> RunRecord:
    return RunRecord(**{k: _parse(k, row[k]) for k in _FIELDS})


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_FIELDS)
        for r in sorted(records, key=RunRecord.sort_key):
            w.writerow(record_to_row(r))


def read_records_csv(path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        return [record_from_row(row) for row in csv.DictReader(fh)]


def pose_error(estimate: RigidTransform, truth: RigidTransform, scene_scale: float = 1.0):
    """(geodesic rotation error in degrees, camera-center distance in cm)."""
    rot = math.degrees(rotation_angle(estimate.R @ truth.R.T))
    trans = 100.0 * scene_scale * float(np.linalg.norm(estimate.camera_center() - truth.camera_center()))
    return rot, trans


# -- checkpoint store ----------------------------------------------------------


def _code_digest() -> str:
    """Hash of the numerical sources, so stored runs go stale when the math changes."""
    root = Path(__file__).resolve().parents[1]
    h = hashlib.sha256()
    for p in sorted(root.rglob("*.py")):
        if p.parent.name == "harness" and p.name != "experiment.py":
            continue
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def settings_fingerprint(spec: ExperimentSpec) -> str:
    """Digest of every setting that can change an individual run's result."""
    d = spec.to_dict()
    for k in ("scene_seeds", "n_queries", "iou_levels", "inits_per_level", "scales",
              "variants", "n_workers", "n_render", "top_k"):
        d.pop(k)
    d["code"] = _code_digest()
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


class RunStore:
    """Append-only JSON-lines file of finished runs, for resuming long sweeps."""

    def __init__(self, directory, spec: ExperimentSpec, name: str = "runs"):
        self.path = Path(directory) / f"{name}-{settings_fingerprint(spec)}.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._data = {}
        if self.path.exists():
            for line in self.path.read_text().splitlines():
                if line.strip():
                    d = json.loads(line)
                    self._data[tuple(d["key"])] = d["value"]

    def get(self, key):
        return self._data.get(tuple(key))

    def put(self, key, value) -> None:
        key = tuple(key)
        self._data[key] = value
        with open(self.path, "a") as fh:
            fh.write(json.dumps({"key": list(key), "value": value}) + "\n")


# -- scenes, queries and initial poses -----------------------------------------


@lru_cache(maxsize=8)
def _room(synth: SynthSpec, seed: int):
    scene, cams = synth_room(synth, seed)
    return scene, tuple(cams), voxelize_scene(scene)


def query_indices(spec: ExperimentSpec, scene_seed: int) -> list[int]:
    """Base-trajectory frames used as queries; a prefix of a fixed permutation."""
    _, cams, _ = _room(spec.scene, scene_seed)
    if spec.n_queries > len(cams):
        raise InvalidSpec(f"n_queries={spec.n_queries} exceeds the {len(cams)} base frames")
    perm = _rng(spec.master_seed, "queries", scene_seed).permutation(len(cams))
    return [int(i) for i in perm[:spec.n_queries]]


def query_image(spec: ExperimentSpec, scene_seed: int, cam: Camera, tag) -> np.ndarray:
    """Render plus Gaussian sensor noise, clipped to [0, 1]."""
    scene, _, _ = _room(spec.scene, scene_seed)
    img = render(scene, cam)
    if spec.query_noise > 0:
        noise = _rng(spec.master_seed, "noise", scene_seed, tag).normal(scale=spec.query_noise, size=img.shape)
        img = np.clip(img + noise, 0.0, 1.0)
    return img


def _run_variants(scene, query, qcam, cam0, spec: ExperimentSpec, wanted):
    """Localize from ``cam0`` for each (method, param, scale), sharing stages between methods."""
    out = {}
    by_scale = {}
    for method, param, scale in wanted:
        by_scale.setdefault(scale, []).append((method, param))
    for scale in sorted(by_scale):
        if scale == 1:
            q, c0 = query, cam0
        else:
            c0 = cam0.scaled(scale)
            q = resize_area(query, c0.height, c0.width)
        cache = {}

        def stage(name, param):
            if (name, param) not in cache:
                cfg = replace(spec.optimizer, pose_param=param)
                if name == "standard":
                    cache[name, param] = localize(scene, q, c0, cfg)
                else:
                    cache[name, param] = coarse_to_fine_localize(scene, q, c0, cfg, spec.blur)
            return cache[name, param]

        for method, param in by_scale[scale]:
            try:
                if method == "two_step":
                    first = stage("standard", param)
                    second = stage("c2f", param) if first.verdict == "failed" else None
                    cfg = replace(spec.optimizer, pose_param=param)
                    res = two_step_localize(scene, q, c0, cfg, spec.blur, first=first, second=second)
                else:
                    res = stage(method, param)
                out[method, param, scale] = res
            except Exception as exc:  # a broken run is recorded, never fatal to the sweep
                out[method, param, scale] = exc
    return out


def _sweep_task(args):
    spec, scene_seed, qi, level, init, wanted = args
    scene, cams, grid = _room(spec.scene, scene_seed)
    qcam = cams[qi]
    base = dict(scene=scene_seed, query=qi, level=level, init=init)
    rng = _rng(spec.master_seed, "init", scene_seed, qi, level, init)
    try:
        target = visible_voxels(qcam, grid, scene, spec.occlusion)
        cam0 = sample_pose_at_iou(qcam, level, spec.iou_tolerance, grid, scene, rng,
                                  occlusion=spec.occlusion, target_set=target)
    except SamplingExhausted as exc:
        nan = float("nan")
        return [RunRecord(**base, method=m, param=p, scale=s, init_iou=nan, init_rot_deg=nan,
                          init_trans_cm=nan, rot_deg=nan, trans_cm=nan, success=False, outcome="",
                          iterations=0, final_psnr=nan, error=f"SamplingExhausted: {exc}")
                for m, p, s in wanted]
    init_iou = iou3d(visible_voxels(cam0, grid, scene, spec.occlusion), target)
    r0, t0 = pose_error(cam0.pose, qcam.pose, spec.scene_scale)
    query = query_image(spec, scene_seed, qcam, qi)
    results = _run_variants(scene, query, qcam, cam0, spec, wanted)
    records = []
    for (m, p, s), res in results.items():
        common = dict(base, method=m, param=p, scale=s, init_iou=init_iou, init_rot_deg=r0, init_trans_cm=t0)
        if isinstance(res, Exception):
            nan = float("nan")
            records.append(RunRecord(**common, rot_deg=nan, trans_cm=nan, success=False, outcome="",
                                     iterations=0, final_psnr=nan, error=f"{type(res).__name__}: {res}"))
            continue
        rot, trans = pose_error(res.pose, qcam.pose, spec.scene_scale)
        records.append(RunRecord(**common, rot_deg=rot, trans_cm=trans,
                                 success=bool(rot < spec.rot_deg and trans < spec.trans_cm),
                                 outcome=res.verdict, iterations=res.iterations_used,
                                 final_psnr=float(res.final_psnr)))
    return records


def _map(fn, tasks, n_workers: int):
    if n_workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            yield fn(t)
        return
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        yield from pool.map(fn, tasks)


def _record_key(r: RunRecord):
    return ["sweep", r.scene, r.query, repr(float(r.level)), r.init, r.method, r.param, r.scale]


def run_iou_sweep(spec: ExperimentSpec, store: RunStore | None = None, progress=None) -> list[RunRecord]:
    """All query x level x init runs for every variant and scale, sorted by key.

    With a ``store``, finished runs are reused and new ones appended as they
    complete. ``progress`` is called with each finished task's records.
    """
    wanted_all = [(*parse_variant(v), int(s)) for s in spec.scales for v in spec.variants]
    done, tasks = [], []
    for scene_seed in spec.scene_seeds:
        for qi in query_indices(spec, scene_seed):
            for level in spec.iou_levels:
                for init in range(spec.inits_per_level):
                    level = float(level)
                    missing = []
                    for m, p, s in wanted_all:
                        key = ["sweep", scene_seed, qi, repr(level), init, m, p, s]
                        hit = store.get(key) if store is not None else None
                        if hit is None:
                            missing.append((m, p, s))
                        else:
                            done.append(record_from_row(hit))
                    if missing:
                        tasks.append((spec, scene_seed, qi, level, init, tuple(missing)))
    for recs in _map(_sweep_task, tasks, spec.n_workers):
        for r in recs:
            if store is not None:
                store.put(_record_key(r), dict(zip(_FIELDS, record_to_row(r))))
            done.append(r)
        if progress is not None:
            progress(recs)
    return sorted(done, key=RunRecord.sort_key)


# -- aggregation ---------------------------------------------------------------

AGG_FIELDS = ["method", "param", "scale", "level", "runs", "success", "rot_ok", "trans_ok",
              "success_rate", "rot_rate", "trans_rate"]


def aggregate(records, spec: ExperimentSpec | None = None, by_level: bool = True) -> list[dict]:
    """Success rates per variant, scale and (optionally) level, overall and per criterion.

    Rotation and translation criteria are also reported on their own. Runs
    without a sampled initial pose are not counted.
    """
    rot_thr = spec.rot_deg if spec else 5.0
    trans_thr = spec.trans_cm if spec else 5.0
    groups = {}
    for r in records:
        if not r.counted:
            continue
        k = (r.method, r.param, r.scale, r.level if by_level else "all")
        g = groups.setdefault(k, [0, 0, 0, 0])
        g[0] += 1
        g[1] += r.success
        g[2] += bool(r.rot_deg < rot_thr)
        g[3] += bool(r.trans_cm < trans_thr)
    rows = []
    for k in sorted(groups, key=lambda k: (k[0], k[1], k[2], str(k[3]))):
        n, s, ro, tr = groups[k]
        rows.append(dict(zip(AGG_FIELDS, (*k, n, s, ro, tr, s / n, ro / n, tr / n))))
    return rows


def write_aggregate_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_FIELDS)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in AGG_FIELDS])


def success_rate(records, **match) -> float:
    """Fraction of counted runs with ``success`` among those matching all ``match`` fields."""
    sel = [r for r in records if r.counted and all(getattr(r, k) == v for k, v in match.items())]
    if not sel:
        return float("nan")
    return sum(r.success for r in sel) / len(sel)


@dataclass(frozen=True)
class Summary:
    runs: int
    successful: int
    mean_rot_deg: float
    median_rot_deg: float
    mean_trans_cm: float
    median_trans_cm: float
    mean_psnr: float


def report(records) -> Summary:
    """Pose-error statistics over successful runs only."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    ok = [r for r in records if r.success]
    if not ok:
        raise NoSuccessfulRuns(f"none of {len(records)} runs succeeded")
    rot = np.array([r.rot_deg for r in ok])
    trans = np.array([r.trans_cm for r in ok])
    ps = np.array([r.final_psnr for r in ok])
    return Summary(len(records), len(ok), float(rot.mean()), float(np.median(rot)),
                   float(trans.mean()), float(np.median(trans)), float(ps.mean()))


def write_sweep_outputs(records, spec: ExperimentSpec, out_dir) -> dict:
    """records.csv, aggregate.csv and success-vs-IoU plots; returns the written paths."""
    from .plots import success_curves_svg

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.csv", "aggregate": out / "aggregate.csv"}
    write_records_csv(records, paths["records"])
    rows = aggregate(records, spec)
    write_aggregate_csv(rows, paths["aggregate"])
    for crit in ("success", "rot", "trans"):
        p = out / f"success_{crit}.svg"
        p.write_text(success_curves_svg(rows, crit))
        paths[f"plot_{crit}"] = p
    return paths


# -- ablation ------------------------------------------------------------------

ALL_VARIANTS = tuple(f"{m}:{p}" for p in PARAMS for m in METHODS)


def run_ablation(spec: ExperimentSpec, out_dir=None, store: RunStore | None = None) -> list[dict]:
    """IoU sweep over every variant in ``spec.variants`` and scale in ``spec.scales``.

    Returns per-variant overall rates. With ``out_dir`` it also writes the
    per-level comparison CSV and line and bar SVG plots.
    """
    records = run_iou_sweep(spec, store)
    overall = aggregate(records, spec, by_level=False)
    if out_dir is not None:
        from .plots import bar_chart_svg, success_curves_svg

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records_csv(records, out / "records.csv")
        per_level = aggregate(records, spec)
        write_aggregate_csv(per_level, out / "comparison.csv")
        write_aggregate_csv(overall, out / "comparison_overall.csv")
        (out / "ablation_curves.svg").write_text(success_curves_svg(per_level, "success"))
        labels = [f"{r['method']}:{r['param']} x{r['scale']}" for r in overall]
        (out / "ablation_bars.svg").write_text(
            bar_chart_svg(labels, [r["success_rate"] for r in overall], "success rate"))
    return overall


# -- retrieval-initialized localization --------------------------------------

RETRIEVAL_FIELDS = ["scene", "query", "extended", "rank", "similarity", "init_iou", "ran",
                    "rot_deg", "trans_cm", "success", "outcome"]


@dataclass(frozen=True)
class RetrievalRecord:
    scene: int
    query: int
    extended: bool
    rank: int
    similarity: float
    init_iou: float
    ran: bool
    rot_deg: float
    trans_cm: float
    success: bool
    outcome: str


@dataclass(frozen=True)
class RetrievalOutcome:
    extended: bool
    queries: int
    success_rate: float
    median_init_iou: float
    records: tuple = field(default=(), repr=False)


def retrieval_queries(spec: ExperimentSpec, scene_seed: int) -> list[Camera]:
    """Held-out query cameras drawn like the base trajectory but from their own stream."""
    return room_cameras(spec.scene, spec.n_queries, _rng(spec.master_seed, "retrieval-queries", scene_seed))


def retrieval_database(spec: ExperimentSpec, scene_seed: int, extend: bool):
    """Captured base frames (noisy renders), plus ``spec.n_render`` renderings when extending."""
    scene, cams, grid = _room(spec.scene, scene_seed)
    images = [query_image(spec, scene_seed, c, f"base{i}") for i, c in enumerate(cams)]
    db = build_database(images, [c.pose for c in cams], {"scene_seed": scene_seed, "master_seed": spec.master_seed})
    if extend:
        db = extend_with_renderings(db, scene, SamplerSpec(n=spec.n_render),
                                    _rng(spec.master_seed, "extend", scene_seed), cams[0], grid)
    return db


def run_retrieval_experiment(spec: ExperimentSpec, extend: bool, store: RunStore | None = None,
                             progress=None) -> RetrievalOutcome:
    """Top-k retrieval initialization followed by two-step localization from each candidate.

    A query succeeds if at least one of its ``top_k`` initializations
    localizes within the thresholds. Candidates are tried in rank order and
    the remaining ones are skipped after the first success. Localization runs
    are memoized by (scene, query, init pose) in ``store``, so the plain and
    extended databases share runs on the poses they both retrieve.
    """
    records = []
    top1 = []
    wins = 0
    total = 0
    for scene_seed in spec.scene_seeds:
        scene, _, grid = _room(spec.scene, scene_seed)
        db = retrieval_database(spec, scene_seed, extend)
        for qi, qcam in enumerate(retrieval_queries(spec, scene_seed)):
            query = query_image(spec, scene_seed, qcam, f"retrieval{qi}")
            target = visible_voxels(qcam, grid, scene, spec.occlusion)
            cands = topk(db, compute_descriptor(query), spec.top_k)
            won = False
            for rank, (pose, sim) in enumerate(cands):
                cam0 = qcam.with_pose(pose)
                iou = iou3d(visible_voxels(cam0, grid, scene, spec.occlusion), target)
                if rank == 0:
                    top1.append(iou)
                if won:
                    records.append(RetrievalRecord(scene_seed, qi, extend, rank, sim, iou, False,
                                                   float("nan"), float("nan"), False, ""))
                    continue
                key = ["retrieval", scene_seed, qi, hashlib.sha256(pose.R.tobytes() + pose.t.tobytes()).hexdigest()]
                hit = store.get(key) if store is not None else None
                if hit is None:
                    res = two_step_localize(scene, query, cam0, spec.optimizer, spec.blur)
                    rot, trans = pose_error(res.pose, qcam.pose, spec.scene_scale)
                    hit = {"rot": rot, "trans": trans, "outcome": res.verdict}
                    if store is not None:
                        store.put(key, hit)
                ok = bool(hit["rot"] < spec.rot_deg and hit["trans"] < spec.trans_cm)
                records.append(RetrievalRecord(scene_seed, qi, extend, rank, sim, iou, True,
                                               hit["rot"], hit["trans"], ok, hit["outcome"]))
                won = won or ok
                if progress is not None:
                    progress(records[-1])
            wins += won
            total += 1
    rate = wins / total if total else float("nan")
    med = float(np.median(top1)) if top1 else float("nan")
    return RetrievalOutcome(extend, total, rate, med, tuple(records))


def write_retrieval_csv(outcomes, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RETRIEVAL_FIELDS)
        for o in outcomes:
            for r in o.records:
                w.writerow([_fmt(getattr(r, k)) for k in RETRIEVAL_FIELDS])


def write_retrieval_summary(outcomes, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["extended", "queries", "success_rate", "median_init_iou"])
        for o in outcomes:
            w.writerow([_fmt(o.extended), o.queries, _fmt(o.success_rate), _fmt(o.median_init_iou)])
