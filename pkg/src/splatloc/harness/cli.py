"""Command line entry point: ``splatloc <command> ...``.

Experiments read a JSON config (an ExperimentSpec) and accept ``--set
key=value`` overrides, where the value is JSON and nested keys use dots,
e.g. ``--set optimizer.max_iters=500``. Exit status is 0 on completion,
2 on configuration errors and 3 on I/O or file-format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from ..errors import FormatError, InvalidSpec, NoSuccessfulRuns, SplatlocError
from ..lie import RigidTransform
from ..optimize import (
    BlurSchedule,
    OptimizerConfig,
    coarse_to_fine_localize,
    load_config,
    localize,
    two_step_localize,
)
from ..render import Camera, read_png, render, write_pfm, write_png
from ..retrieval import (
    SamplerSpec,
    build_database,
    compute_descriptor,
    extend_with_renderings,
    load_database,
    save_database,
    topk,
)
from ..scene import SynthSpec, export_json, load_scene, save_scene, synth_room
from .experiment import (
    ExperimentSpec,
    RunStore,
    read_records_csv,
    report,
    run_ablation,
    run_iou_sweep,
    run_retrieval_experiment,
    save_spec,
    write_retrieval_csv,
    write_retrieval_summary,
    write_sweep_outputs,
)

EXIT_CONFIG = 2
EXIT_IO = 3


# -- camera files ----------------------------------------------------------------


def camera_to_dict(cam: Camera) -> dict:
    return {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy, "width": cam.width,
            "height": cam.height, "near": cam.near, "far": cam.far,
            "R": cam.pose.R.tolist(), "t": cam.pose.t.tolist()}


def camera_from_dict(d: dict) -> Camera:
    try:
        pose = RigidTransform(np.array(d["R"], dtype=np.float64), np.array(d["t"], dtype=np.float64))
        return Camera(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]), int(d["width"]),
                      int(d["height"]), pose, float(d.get("near", 0.2)), float(d.get("far", 50.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"bad camera: {exc}") from None


def save_cameras(cams, path) -> None:
    Path(path).write_text(json.dumps([camera_to_dict(c) for c in cams], indent=1) + "\n")


def load_cameras(path) -> list[Camera]:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = [data]
    return [camera_from_dict(d) for d in data]


# -- config handling -------------------------------------------------------------


def _apply_overrides(d: dict, sets) -> dict:
    for item in sets or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise InvalidSpec(f"override {item!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return d


def _experiment_spec(args) -> ExperimentSpec:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    return ExperimentSpec.from_dict(_apply_overrides(d, args.set))


def _synth_spec(args) -> SynthSpec:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d = _apply_overrides(d, args.set)
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        spec = SynthSpec(**d)
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from None
    spec.validate()
    return spec


def _progress(quiet: bool):
    if quiet:
        return None
    count = [0]

    def show(recs):
        count[0] += 1
        r = recs[0]
        print(f"[{count[0]}] scene {r.scene} query {r.query} level {r.level} init {r.init}: "
              + ", ".join(f"{x.method}:{x.param} x{x.scale} {'ok' if x.success else 'fail'}" for x in recs),
              file=sys.stderr, flush=True)

    return show


# -- commands --------------------------------------------------------------------


def cmd_synth(args) -> None:
    spec = _synth_spec(args)
    scene, cams = synth_room(spec, args.seed)
    save_scene(scene, args.out)
    if args.cameras:
        save_cameras(cams, args.cameras)
    if args.json:
        export_json(scene, args.json)
    print(f"{len(scene)} Gaussians, {len(cams)} cameras -> {args.out}")


def cmd_render(args) -> None:
    scene = load_scene(args.scene)
    cams = load_cameras(args.cameras)
    if not 0 <= args.index < len(cams):
        raise InvalidSpec(f"camera index {args.index} out of range 0..{len(cams) - 1}")
    img = render(scene, cams[args.index])
    if args.out.lower().endswith(".pfm"):
        write_pfm(args.out, img)
    else:
        write_png(args.out, img)


def cmd_localize(args) -> None:
    scene = load_scene(args.scene)
    query = read_png(args.query)
    cam0 = load_cameras(args.camera)[args.index]
    cfg, blur = load_config(args.opt_config) if args.opt_config else (OptimizerConfig(), BlurSchedule())
    cfg = replace(cfg, pose_param=args.param)
    if args.max_iters is not None:
        cfg = replace(cfg, max_iters=args.max_iters)
    if args.method == "standard":
        res = localize(scene, query, cam0, cfg)
    elif args.method == "c2f":
        res = coarse_to_fine_localize(scene, query, cam0, cfg, blur)
    else:
        res = two_step_localize(scene, query, cam0, cfg, blur)
    out = camera_to_dict(cam0.with_pose(res.pose))
    out.update(verdict=res.verdict, iterations=res.iterations_used, final_psnr=res.final_psnr,
               stages=[list(s) for s in res.stages])
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.trace:
        res.trace.to_csv(args.trace)


def _store(args, spec):
    return RunStore(args.store, spec) if args.store else None


def _output_dir(args, spec) -> Path:
    # the resolved spec travels with the tables, so e.g. the IoU visibility mode is on record
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_spec(spec, out / "spec.json")
    return out


def cmd_iou_sweep(args) -> None:
    spec = _experiment_spec(args)
    records = run_iou_sweep(spec, _store(args, spec), _progress(args.quiet))
    paths = write_sweep_outputs(records, spec, _output_dir(args, spec))
    print(f"{len(records)} runs -> {paths['records']}")


def cmd_ablate(args) -> None:
    spec = _experiment_spec(args)
    rows = run_ablation(spec, _output_dir(args, spec), _store(args, spec))
    for r in rows:
        print(f"{r['method']}:{r['param']} x{r['scale']}: {r['success']}/{r['runs']} = {r['success_rate']:.3f}")


def cmd_retrieval(args) -> None:
    spec = _experiment_spec(args)
    store = _store(args, spec)
    outcomes = [run_retrieval_experiment(spec, ext, store) for ext in (False, True)]
    out = _output_dir(args, spec)
    write_retrieval_csv(outcomes, out / "retrieval_records.csv")
    write_retrieval_summary(outcomes, out / "retrieval_summary.csv")
    for o in outcomes:
        print(f"extended={o.extended}: success {o.success_rate:.3f} over {o.queries} queries, "
              f"median top-1 IoU {o.median_init_iou:.3f}")


def cmd_report(args) -> None:
    records = read_records_csv(args.records)
    if args.method:
        records = [r for r in records if f"{r.method}:{r.param}" == args.method or r.method == args.method]
    s = report([r for r in records if r.counted])
    text = json.dumps(asdict(s), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_db(args) -> None:
    if args.db_command == "build":
        scene = load_scene(args.scene)
        cams = load_cameras(args.cameras)
        rng = np.random.default_rng(args.seed)
        images = []
        for c in cams:
            img = render(scene, c)
            if args.noise > 0:
                img = np.clip(img + rng.normal(scale=args.noise, size=img.shape), 0.0, 1.0)
            images.append(img)
        db = build_database(images, [c.pose for c in cams], {"scene": str(args.scene), "seed": args.seed})
        save_database(db, args.out)
        print(f"{len(db)} entries -> {args.out}")
    elif args.db_command == "extend":
        db = load_database(args.db)
        scene = load_scene(args.scene)
        cam = load_cameras(args.cameras)[0]
        db = extend_with_renderings(db, scene, SamplerSpec(n=args.n), np.random.default_rng(args.seed), cam)
        save_database(db, args.out)
        print(f"{len(db)} entries ({db.count('rendered')} rendered) -> {args.out}")
    else:
        db = load_database(args.db)
        for pose, sim in topk(db, compute_descriptor(read_png(args.image)), args.k):
            print(json.dumps({"similarity": sim, "R": pose.R.tolist(), "t": pose.t.tolist()}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splatloc", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")

    s = sub.add_parser("synth", help="synthesize a room scene and its base trajectory")
    with_config(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="scene binary")
    s.add_argument("--cameras", help="camera JSON output")
    s.add_argument("--json", help="debug JSON export of the scene")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("render", help="render one camera to PNG or PFM")
    s.add_argument("--scene", required=True)
    s.add_argument("--cameras", required=True)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_render)

    s = sub.add_parser("localize", help="localize one query image")
    s.add_argument("--scene", required=True)
    s.add_argument("--query", required=True, help="query PNG")
    s.add_argument("--camera", required=True, help="camera JSON with the initial pose")
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--method", choices=("standard", "c2f", "two_step"), default="two_step")
    s.add_argument("--param", choices=("manifold", "quat_trans"), default="manifold")
    s.add_argument("--opt-config", help="JSON with 'optimizer' and 'blur' sections")
    s.add_argument("--max-iters", type=int)
    s.add_argument("--out", help="result JSON (stdout if omitted)")
    s.add_argument("--trace", help="per-iteration CSV")
    s.set_defaults(fn=cmd_localize)

    for name, fn, helptext in (("iou-sweep", cmd_iou_sweep, "success rate against initial IoU"),
                               ("ablate", cmd_ablate, "method, parametrization and resolution ablation"),
                               ("retrieval", cmd_retrieval, "retrieval initialization with and without extension")):
        s = sub.add_parser(name, help=helptext)
        with_config(s)
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--store", help="directory for resumable run checkpoints")
        s.add_argument("--quiet", action="store_true")
        s.set_defaults(fn=fn)

    s = sub.add_parser("report", help="pose-error summary of successful runs")
    s.add_argument("--records", required=True, help="records.csv from a sweep")
    s.add_argument("--method", help="restrict to a method or method:param")
    s.add_argument("--out", help="summary JSON")
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("db", help="retrieval database tools")
    dbs = s.add_subparsers(dest="db_command", required=True)
    b = dbs.add_parser("build")
    b.add_argument("--scene", required=True)
    b.add_argument("--cameras", required=True)
    b.add_argument("--noise", type=float, default=0.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    e = dbs.add_parser("extend")
    e.add_argument("--db", required=True)
    e.add_argument("--scene", required=True)
    e.add_argument("--cameras", required=True, help="camera JSON supplying the intrinsics")
    e.add_argument("--n", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    q = dbs.add_parser("query")
    q.add_argument("--db", required=True)
    q.add_argument("--image", required=True)
    q.add_argument("--k", type=int, default=5)
    s.set_defaults(fn=cmd_db)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except (InvalidSpec, NoSuccessfulRuns, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SplatlocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
