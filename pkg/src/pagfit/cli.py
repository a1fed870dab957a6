"""Command line interface exposing the pipeline stages as subcommands.

    pagfit validate-pag graph.json
    pagfit synth --spec spec.json --out scene_dir
    pagfit segment --cloud obj.ply --views views.json --pag graph.json \
                   --object <id> --out labeled.ply
    pagfit optimize --scene scene_dir/scene.json --out results_dir
    pagfit align --manifest align.json --out transforms.json
    pagfit metrics --sample sample.json [--sample ...] --out metrics.json

Exit codes: 0 success, 1 validation/processing failure (machine-readable
JSON on stderr), 2 usage error. Config precedence: flags > --config file >
built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import evalmetrics, pag, partseg
from .errors import FormatError, PagfitError
from .geom import load_ply_cloud, save_ply_cloud
from .hoiopt import align as align_mod
from .hoiopt import sceneio
from .hoiopt.data import LossWeights
from .hoiopt.optimize import OptimizeConfig, optimize
from .synth import ScenarioSpec, generate_scene

THREADS_ENV = "PAGFIT_THREADS"


def _apply_threads(value: int | None) -> None:
    n = value if value is not None else os.environ.get(THREADS_ENV)
    if n is None:
        return
    import torch
    torch.set_num_threads(int(n))


def _fail(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")
    return 1


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate_pag(args) -> int:
    try:
        graph = pag.load_pag(args.graph)
    except json.JSONDecodeError as e:
        return _fail("SyntaxError", str(e))
    vocabulary = pag.BODY_PART_VOCABULARY
    if args.body_parts:
        vocabulary = tuple(json.loads(Path(args.body_parts).read_text()))
    report = pag.validate_pag(graph, vocabulary)
    doc = {
        "valid": not report,
        "violations": [
            {"code": v.code, "subject": v.subject, "message": v.message}
            for v in report
        ],
    }
    print(json.dumps(doc, indent=2))
    return 0 if not report else 1


def cmd_synth(args) -> int:
    spec = ScenarioSpec.from_json(Path(args.spec).read_text())
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    result = generate_scene(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = sceneio.save_scene(result.scene, out,
                                  dilation=spec.noise.mask_dilation)
    sceneio.save_trajectories(result.ground_truth, out / "ground_truth.json")
    (out / "spec.json").write_text(spec.to_json())
    print(json.dumps({"scene": str(manifest),
                      "ground_truth": str(out / "ground_truth.json")}))
    return 0


def cmd_segment(args) -> int:
    cloud = load_ply_cloud(args.cloud)
    views = partseg.load_views_manifest(args.views)
    graph = pag.load_pag(args.pag)
    part_nodes = [(i, p) for i, p in enumerate(graph.part_nodes)
                  if p.owner == args.object and p.kind == "object_part"]
    if not part_nodes:
        raise FormatError(f"graph has no object parts owned by {args.object!r}")
    labels = [p.label for _, p in part_nodes]
    labeled = partseg.vote_labels(cloud, views, labels)
    global_idx = np.asarray([gi for gi, _ in part_nodes], dtype=np.int64)
    relabeled = global_idx[np.asarray(labeled.labels)]
    save_ply_cloud(type(cloud)(labeled.points, relabeled), args.out)
    print(json.dumps({"labeled": args.out,
                      "points": len(labeled),
                      "parts": {lab: int((labeled.labels == i).sum())
                                for i, lab in enumerate(labels)}}))
    return 0


def _load_config_file(path) -> dict:
    return json.loads(Path(path).read_text()) if path else {}


def cmd_optimize(args) -> int:
    _apply_threads(args.threads)
    cfg_file = _load_config_file(args.config)

    def pick(name, flag, default):
        if flag is not None:
            return flag
        return cfg_file.get(name, default)

    weights = LossWeights(
        fit=float(pick("weight_fit", args.weight_fit, 1.0)),
        contact=float(pick("weight_contact", args.weight_contact, 1.0)),
        penetration=float(pick("weight_penetration", args.weight_penetration, 10.0)),
        smooth=float(pick("weight_smooth", args.weight_smooth, 0.1)),
    )
    config = OptimizeConfig(
        steps=int(pick("steps", args.steps, 600)),
        restarts=int(pick("restarts", args.restarts, 4)),
        seed=int(pick("seed", args.seed, 0)),
        learning_rate=float(pick("learning_rate", args.learning_rate, 1e-2)),
        subsample=(None if int(pick("subsample", args.subsample, 4096)) <= 0
                   else int(pick("subsample", args.subsample, 4096))),
        weights=weights,
    )
    scene = sceneio.load_scene(args.scene)
    result = optimize(scene, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sceneio.save_trajectories(result.trajectories, out / "trajectories.json")
    sceneio.save_trace(result.trace, out / "loss_trace.csv")
    report = {
        "total": result.total,
        "chosen_restart": result.chosen_restart,
        "breakdown": result.breakdown.to_dict(),
        "restarts": [
            {"index": r.index, "yaw": r.yaw, "total": r.final_total,
             "failed": r.failed}
            for r in result.restarts
        ],
    }
    (out / "report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps({"trajectories": str(out / "trajectories.json"),
                      "total": result.total,
                      "chosen_restart": result.chosen_restart}))
    return 0


def cmd_align(args) -> int:
    _apply_threads(args.threads)
    manifest_path = Path(args.manifest)
    doc = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    k = sceneio.load_intrinsics(root / doc["intrinsics"])
    motion = sceneio.load_human_motion(root / doc["human_motion"])
    point_maps = []
    pixels = []
    for entry in doc["frames"]:
        if entry is None:
            point_maps.append(None)
            pixels.append(None)
            continue
        point_maps.append(np.asarray(load_ply_cloud(root / entry["points"]).points))
        if entry.get("mask"):
            pixels.append(sceneio.mask_pixels(sceneio.load_mask(root / entry["mask"])))
        else:
            pixels.append(None)
    transforms = align_mod.align_point_maps(point_maps, pixels, motion, k,
                                            steps=args.steps)
    out_doc = {"version": 1, "frames": [t.to_dict() for t in transforms]}
    Path(args.out).write_text(json.dumps(out_doc, indent=2))
    print(json.dumps({"transforms": args.out, "frames": len(transforms)}))
    return 0


def _load_sample(path):
    doc = json.loads(Path(path).read_text())
    root = Path(path).parent
    scene = sceneio.load_scene(root / doc["scene"])
    trajectories = sceneio.load_trajectories(root / doc["trajectories"])
    sample = evalmetrics.InteractionSample(
        humans=tuple(scene.humans[h] for h in scene.human_ids()),
        trajectories=trajectories,
        objects=scene.objects,
    )
    return sample, scene.sdfs


def cmd_metrics(args) -> int:
    samples = []
    sdfs = None
    for spath in args.sample:
        sample, sample_sdfs = _load_sample(spath)
        samples.append(sample)
        sdfs = sdfs or sample_sdfs
    per_sample = [evalmetrics.evaluate_sample(s, sdfs, tolerance=args.tolerance)
                  for s in samples]
    doc = {"samples": per_sample}
    if len(samples) >= 2:
        doc["motion_diversity"] = evalmetrics.motion_diversity(samples)
    Path(args.out).write_text(json.dumps(doc, indent=2))
    if args.csv:
        import csv as csvmod
        with open(args.csv, "w", newline="") as fh:
            w = csvmod.writer(fh)
            w.writerow(["sample", "smoothness_human", "smoothness_object",
                        "non_collision", "contact"])
            for i, m in enumerate(per_sample):
                w.writerow([i,
                            repr(m["temporal_smoothness"]["human"]),
                            repr(m["temporal_smoothness"]["object"]),
                            repr(m["physical_plausibility"]["non_collision"]),
                            repr(m["physical_plausibility"]["contact"])])
    print(json.dumps({"metrics": args.out, "samples": len(samples)}))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pagfit",
        description="Part-affordance-guided 4D human-object interaction fitting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-pag", help="validate a part affordance graph")
    p.add_argument("graph")
    p.add_argument("--body-parts", help="JSON list overriding the body-part vocabulary")
    p.set_defaults(fn=cmd_validate_pag)

    p = sub.add_parser("synth", help="generate a synthetic scene from a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("segment", help="label a cloud from multi-view part masks")
    p.add_argument("--cloud", required=True)
    p.add_argument("--views", required=True)
    p.add_argument("--pag", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("optimize", help="fit object trajectories to a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.add_argument("--steps", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--subsample", type=int, help="max points per cloud (<=0 disables)")
    p.add_argument("--weight-fit", type=float, dest="weight_fit")
    p.add_argument("--weight-contact", type=float, dest="weight_contact")
    p.add_argument("--weight-penetration", type=float, dest="weight_penetration")
    p.add_argument("--weight-smooth", type=float, dest="weight_smooth")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("align", help="align point maps to recovered human motion")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("metrics", help="evaluate fitted interaction samples")
    p.add_argument("--sample", action="append", required=True,
                   help="JSON with {scene, trajectories} paths; repeatable")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--tolerance", type=float,
                   default=evalmetrics.COLLISION_TOLERANCE)
    p.set_defaults(fn=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except json.JSONDecodeError as e:
        return _fail("SyntaxError", str(e))
    except FileNotFoundError as e:
        return _fail("FileNotFound", str(e))
    except PagfitError as e:
        return _fail(type(e).__name__, str(e))
    except (ValueError, KeyError) as e:
        return _fail(type(e).__name__, str(e))


if __name__ == "__main__":
    sys.exit(main())
