"""File formats: panoptic bundles, instance records, masks and dense arrays.

A panoptic bundle is a lossless RGB raster where the segment id is encoded as
``R + 256*G + 256^2*B`` (id 0 = void), paired with a metadata record listing
``(id, category_id, isthing, area)`` per segment. Every writer here is
deterministic: identical inputs produce byte-identical files.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .blend import InstanceMask
from .fusion import PanopticResult
from .grids import BBox
from .scoring import Detection, ScoredInstance
from .silhouette import VOID_ID, SegmentInfo, SegmentTable

ID_LIMIT = 256**3


@dataclass
class PanopticFileBundle:
    """In-memory form of the on-disk pair: RGB raster plus segment records."""

    raster: np.ndarray  # (H, W, 3) uint8
    segments: List[Dict]


def encode_panoptic(result: PanopticResult) -> PanopticFileBundle:
    """Encode ids into base-256 RGB digits; round-trips bit-exactly."""
    ids = np.asarray(result.ids)
    if ids.min() < 0 or ids.max() >= ID_LIMIT:
        raise ValueError(f"segment ids must lie in [0, {ID_LIMIT}), got max {ids.max()}")
    raster = np.empty(ids.shape + (3,), dtype=np.uint8)
    raster[..., 0] = ids % 256
    raster[..., 1] = (ids >> 8) % 256
    raster[..., 2] = ids >> 16
    segments = [
        {
            "id": info.segment_id,
            "category_id": info.category_id,
            "isthing": bool(info.is_thing),
            "area": info.area,
        }
        for info in result.table.infos
    ]
    return PanopticFileBundle(raster=raster, segments=segments)


def decode_panoptic(bundle: PanopticFileBundle) -> PanopticResult:
    """Rebuild ids and table from a bundle, validating areas and orphan ids."""
    raster = np.asarray(bundle.raster)
    if raster.ndim != 3 or raster.shape[2] != 3 or raster.dtype != np.uint8:
        raise ValueError(f"malformed raster: expected (H, W, 3) uint8, got {raster.shape} {raster.dtype}")
    ids = (
        raster[..., 0].astype(np.int32)
        + raster[..., 1].astype(np.int32) * 256
        + raster[..., 2].astype(np.int32) * 65536
    )
    table = SegmentTable(
        SegmentInfo(
            segment_id=int(rec["id"]),
            category_id=int(rec["category_id"]),
            is_thing=bool(rec["isthing"]),
            area=int(rec["area"]),
        )
        for rec in bundle.segments
    )
    table.validate_map(ids)
    return PanopticResult(ids=ids, table=table)


def write_bundle(result: PanopticResult, png_path: Path, json_path: Path) -> None:
    bundle = encode_panoptic(result)
    Image.fromarray(bundle.raster, mode="RGB").save(png_path, format="PNG")
    _write_json(json_path, {"segments": bundle.segments})


def read_bundle(png_path: Path, json_path: Path) -> PanopticResult:
    with Image.open(png_path) as im:
        raster = np.asarray(im.convert("RGB"), dtype=np.uint8)
    meta = json.loads(Path(json_path).read_text())
    return decode_panoptic(PanopticFileBundle(raster=raster, segments=meta["segments"]))


def save_mask_png(mask: np.ndarray, path: Path) -> None:
    arr = (np.asarray(mask, dtype=bool).astype(np.uint8)) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask_png(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) >= 128


def save_array(arr: np.ndarray, path: Path) -> None:
    # .npy rather than .npz: zip members would embed timestamps.
    np.save(path, np.ascontiguousarray(arr))


def load_array(path: Path) -> np.ndarray:
    return np.load(path)


def _write_json(path: Path, payload) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _box_record(box: BBox) -> List[float]:
    return [box.x0, box.y0, box.x1, box.y1]


@dataclass
class DetectionRecord:
    """Detection plus the optional confidence-head scores carried in the file."""

    detection: Detection
    iou_score: Optional[float] = None
    silhouette_score: Optional[float] = None


def write_detections(
    dets: Sequence[Detection],
    path: Path,
    iou_scores: Optional[Sequence[float]] = None,
    silhouette_scores: Optional[Sequence[float]] = None,
) -> None:
    records = []
    for i, d in enumerate(dets):
        rec = {
            "box": _box_record(d.box),
            "class_id": d.class_id,
            "fcos_score": d.fcos_score,
        }
        if iou_scores is not None:
            rec["iou_score"] = float(iou_scores[i])
        if silhouette_scores is not None:
            rec["silhouette_score"] = float(silhouette_scores[i])
        if d.attention is not None:
            rec["attention"] = [float(v) for v in np.asarray(d.attention).ravel()]
        records.append(rec)
    _write_json(path, {"detections": records})


def read_detections(path: Path) -> List[DetectionRecord]:
    payload = json.loads(Path(path).read_text())
    out = []
    for rec in payload["detections"]:
        att = np.asarray(rec["attention"], dtype=np.float64) if "attention" in rec else None
        det = Detection(
            box=BBox(*(float(v) for v in rec["box"])),
            class_id=int(rec["class_id"]),
            fcos_score=float(rec["fcos_score"]),
            attention=att,
        )
        out.append(
            DetectionRecord(
                detection=det,
                iou_score=float(rec["iou_score"]) if "iou_score" in rec else None,
                silhouette_score=float(rec["silhouette_score"]) if "silhouette_score" in rec else None,
            )
        )
    return out


def write_instances(
    instances: Sequence[ScoredInstance], json_path: Path, mask_dir: Path
) -> None:
    """Scored-instance records with per-instance binary mask rasters."""
    mask_dir = Path(mask_dir)
    mask_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, inst in enumerate(instances):
        mask_name = f"inst_{i:03d}.png"
        save_mask_png(inst.mask.binary, mask_dir / mask_name)
        records.append(
            {
                "box": _box_record(inst.detection.box),
                "class_id": inst.detection.class_id,
                "fcos_score": inst.detection.fcos_score,
                "iou_score": inst.iou_score,
                "silhouette_score": inst.silhouette_score,
                "mask_score": inst.mask_score,
                "mask": f"{mask_dir.name}/{mask_name}",
            }
        )
    _write_json(json_path, {"instances": records})


def read_instances(json_path: Path) -> List[ScoredInstance]:
    json_path = Path(json_path)
    payload = json.loads(json_path.read_text())
    out = []
    for rec in payload["instances"]:
        binary = load_mask_png(json_path.parent / rec["mask"])
        box = BBox(*(float(v) for v in rec["box"]))
        mask = InstanceMask(probs=binary.astype(np.float64), binary=binary, box=box)
        out.append(
            ScoredInstance(
                detection=Detection(
                    box=box, class_id=int(rec["class_id"]), fcos_score=float(rec["fcos_score"])
                ),
                mask=mask,
                iou_score=float(rec["iou_score"]),
                silhouette_score=float(rec["silhouette_score"]),
                mask_score=float(rec["mask_score"]),
            )
        )
    return out


def write_stuff(stuff_probs: np.ndarray, categories: Sequence[int], npy_path: Path, json_path: Path) -> None:
    save_array(np.asarray(stuff_probs, dtype=np.float64), npy_path)
    _write_json(json_path, {"categories": [int(c) for c in categories]})


def read_stuff(npy_path: Path, json_path: Path) -> tuple[np.ndarray, List[int]]:
    probs = load_array(npy_path)
    meta = json.loads(Path(json_path).read_text())
    return probs, [int(c) for c in meta["categories"]]
