"""Command-line front end: synth, silhouette, compose, fuse, eval, check-grad."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import panoptic_io as pio
from .blend import compose_instance
from .config import ToolConfig, make_config
from .fusion import fuse_panoptic
from .gradcheck import run_gradient_suites
from .metrics import PQReport, pq_evaluate
from .scoring import ScoredInstance, mask_score, nms
from .silhouette import extract_silhouette
from .synth import SceneSpec, synth_scene

GRAD_TOLERANCE = 1e-4

_CONFIG_FLAGS = (
    "alpha",
    "eps",
    "nms_iou",
    "dup_iou",
    "score_min",
    "keep_frac",
    "min_instance_area",
    "min_stuff_area",
    "n_bases",
    "native_res",
    "mask_res",
    "samples_per_bin",
    "mask_threshold",
)
_INT_FLAGS = {"min_instance_area", "min_stuff_area", "n_bases", "native_res", "mask_res", "samples_per_bin"}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key = value config file")
    for name in _CONFIG_FLAGS:
        flag = "--" + name.replace("_", "-")
        parser.add_argument(flag, type=int if name in _INT_FLAGS else float, default=None)


def _config_from_args(args: argparse.Namespace) -> ToolConfig:
    overrides = {name: getattr(args, name) for name in _CONFIG_FLAGS}
    return make_config(args.config, overrides)


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    spec = SceneSpec(
        seed=args.seed,
        height=args.height,
        width=args.width,
        min_instances=args.min_instances,
        max_instances=args.max_instances,
        shapes=args.shapes,
        stuff_regions=args.stuff_regions,
        box_jitter=args.box_jitter,
        flip_prob=args.flip_prob,
        score_noise=args.score_noise,
    )
    scene = synth_scene(spec, cfg.blend_params(), cfg.fusion_params(), eps=cfg.eps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_bundle(scene.gt, out / "gt.png", out / "gt.json")
    pio.write_detections(
        scene.detections,
        out / "detections.json",
        iou_scores=[s.iou_score for s in scene.scored],
        silhouette_scores=[s.silhouette_score for s in scene.scored],
    )
    pio.save_array(scene.bases, out / "bases.npy")
    pio.write_stuff(scene.stuff_probs, scene.stuff_categories, out / "stuff.npy", out / "stuff.json")
    pio.write_instances(scene.scored, out / "instances.json", out / "masks")
    print(f"synth: wrote scene with {len(scene.scored)} instances to {out}")
    return 0


def _cmd_silhouette(args: argparse.Namespace) -> int:
    result = pio.read_bundle(args.map, args.meta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    targets = ("things", "stuff", "all") if args.target == "all" else (args.target,)
    for target in targets:
        sil = extract_silhouette(result.ids, result.table, target)
        pio.save_mask_png(sil, out / f"silhouette_{target}.png")
        print(f"silhouette: {target} has {int(np.count_nonzero(sil))} pixels")
    return 0


def _cmd_compose(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    records = pio.read_detections(args.detections)
    bases = pio.load_array(args.bases)
    if bases.ndim != 3:
        raise ValueError(f"bases array must be (n_bases, H, W), got shape {bases.shape}")
    h, w = bases.shape[1:]
    keep = nms([r.detection for r in records], cfg.nms_iou)
    blend = cfg.blend_params()
    instances: List[ScoredInstance] = []
    for i in keep:
        rec = records[i]
        det = rec.detection
        if det.attention is None:
            raise ValueError(f"detection {i} has no attention vector")
        mask = compose_instance(det.attention, bases, det.box, h, w, blend)
        # The confidence scores are inputs here; without them the detection
        # score stands in for the IoU score and the silhouette tie-break
        # becomes neutral.
        iou = rec.iou_score if rec.iou_score is not None else det.fcos_score
        sil = rec.silhouette_score if rec.silhouette_score is not None else 1.0
        instances.append(
            ScoredInstance(
                detection=det,
                mask=mask,
                iou_score=iou,
                silhouette_score=sil,
                mask_score=mask_score(det.fcos_score, iou, cfg.alpha),
            )
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_instances(instances, out / "instances.json", out / "masks")
    print(f"compose: kept {len(keep)} of {len(records)} detections")
    return 0


def _cmd_fuse(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    instances = pio.read_instances(args.instances)
    stuff_probs, stuff_categories = pio.read_stuff(args.stuff, args.stuff_meta)
    result = fuse_panoptic(instances, stuff_probs, cfg.fusion_params(), stuff_categories)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pio.write_bundle(result, out / "pred.png", out / "pred.json")
    print(f"fuse: wrote {len(result.table)} segments to {out}")
    return 0


def _format_report(report: PQReport) -> str:
    lines = [f"{'category':>10} {'PQ':>8} {'SQ':>8} {'RQ':>8} {'TP':>4} {'FP':>4} {'FN':>4}"]
    for cat in sorted(report.per_class):
        r = report.per_class[cat]
        lines.append(
            f"{cat:>10} {r.pq:8.4f} {r.sq:8.4f} {r.rq:8.4f} {r.tp:4d} {r.fp:4d} {r.fn:4d}"
        )
    lines.append(f"{'ALL':>10} {report.pq:8.4f} {report.sq:8.4f} {report.rq:8.4f}")
    if report.pq_things is not None:
        lines.append(f"{'Things':>10} {report.pq_things:8.4f}")
    if report.pq_stuff is not None:
        lines.append(f"{'Stuff':>10} {report.pq_stuff:8.4f}")
    return "\n".join(lines)


def _report_payload(report: PQReport) -> dict:
    return {
        "pq": report.pq,
        "sq": report.sq,
        "rq": report.rq,
        "pq_things": report.pq_things,
        "pq_stuff": report.pq_stuff,
        "num_classes": report.num_classes,
        "per_class": {
            str(cat): {
                "pq": r.pq,
                "sq": r.sq,
                "rq": r.rq,
                "tp": r.tp,
                "fp": r.fp,
                "fn": r.fn,
                "iou_sum": r.iou_sum,
            }
            for cat, r in sorted(report.per_class.items())
        },
    }


def _cmd_eval(args: argparse.Namespace) -> int:
    pairs = []
    if args.pred_dir is not None or args.gt_dir is not None:
        if args.pred_dir is None or args.gt_dir is None:
            raise ValueError("--pred-dir and --gt-dir must be given together")
        pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
        stems = sorted(p.stem for p in gt_dir.glob("*.png"))
        if not stems:
            raise ValueError(f"no .png label maps found in {gt_dir}")
        for stem in stems:
            pred = pio.read_bundle(pred_dir / f"{stem}.png", pred_dir / f"{stem}.json")
            gt = pio.read_bundle(gt_dir / f"{stem}.png", gt_dir / f"{stem}.json")
            pairs.append((pred, gt))
    else:
        if args.pred_map is None or args.gt_map is None:
            raise ValueError("need --pred-map/--gt-map or --pred-dir/--gt-dir")
        pred = pio.read_bundle(args.pred_map, args.pred_meta)
        gt = pio.read_bundle(args.gt_map, args.gt_meta)
        pairs.append((pred, gt))

    categories: dict[int, bool] = {}
    for pred, gt in pairs:
        for table in (pred.table, gt.table):
            for cat, is_thing in table.categories().items():
                if categories.setdefault(cat, is_thing) != is_thing:
                    raise ValueError(f"category {cat} is both thing and stuff across inputs")

    start = time.perf_counter()
    report = pq_evaluate(pairs, categories)
    elapsed = time.perf_counter() - start
    print(_format_report(report))
    print(f"eval: {len(pairs)} image pair(s) in {elapsed:.3f}s")
    if args.out is not None:
        Path(args.out).write_text(json.dumps(_report_payload(report), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_check_grad(args: argparse.Namespace) -> int:
    worst = run_gradient_suites(n_cases=args.cases, size=args.size, h=args.step, seed=args.seed)
    status = 0
    for name in sorted(worst):
        ok = worst[name] < GRAD_TOLERANCE
        print(f"check-grad: {name:<14} max relative error {worst[name]:.3e} "
              f"{'ok' if ok else f'EXCEEDS {GRAD_TOLERANCE:g}'}")
        if not ok:
            status = 1
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panoptikit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene directory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--min-instances", type=int, default=3)
    p.add_argument("--max-instances", type=int, default=6)
    p.add_argument("--shapes", choices=("rect", "ellipse", "mixed"), default="mixed")
    p.add_argument("--stuff-regions", type=int, default=3)
    p.add_argument("--box-jitter", type=float, default=0.0)
    p.add_argument("--flip-prob", type=float, default=0.0)
    p.add_argument("--score-noise", type=float, default=0.0)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("silhouette", help="extract silhouette masks from a panoptic bundle")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--meta", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--target", choices=("things", "stuff", "all"), default="all")
    p.set_defaults(func=_cmd_silhouette)

    p = sub.add_parser("compose", help="NMS detections and compose instance masks")
    p.add_argument("--detections", type=Path, required=True)
    p.add_argument("--bases", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("fuse", help="fuse scored instances and stuff probabilities")
    p.add_argument("--instances", type=Path, required=True)
    p.add_argument("--stuff", type=Path, required=True)
    p.add_argument("--stuff-meta", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("eval", help="panoptic quality of prediction vs ground truth")
    p.add_argument("--pred-map", type=Path)
    p.add_argument("--pred-meta", type=Path)
    p.add_argument("--gt-map", type=Path)
    p.add_argument("--gt-meta", type=Path)
    p.add_argument("--pred-dir", type=Path)
    p.add_argument("--gt-dir", type=Path)
    p.add_argument("--out", type=Path, help="also write the report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("check-grad", help="finite-difference check of all loss gradients")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check_grad)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
