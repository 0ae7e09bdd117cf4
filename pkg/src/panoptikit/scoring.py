"""Detection NMS, confidence targets, and the fused mask score used for ranking.

The fused score blends the detector confidence with the (predicted or
computed) mask IoU score, ``alpha * fcos + (1 - alpha) * iou``. The
silhouette score only intervenes between instances that plausibly describe
the same object (same class, strongly overlapping masks): within such a
group the member with the cleaner silhouette is ranked first.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .blend import InstanceMask
from .grids import BBox
from .silhouette import dice_score, mask_silhouette


@dataclass
class Detection:
    """One box-head detection; the attention vector may be absent for IO-only use."""

    box: BBox
    class_id: int
    fcos_score: float
    attention: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.box.require_valid()
        if not 0.0 <= self.fcos_score <= 1.0:
            raise ValueError(f"fcos_score must lie in [0, 1], got {self.fcos_score}")


@dataclass
class ScoredInstance:
    """Detection plus composed mask and the confidence-head style scores."""

    detection: Detection
    mask: InstanceMask
    iou_score: float
    silhouette_score: float
    mask_score: float


def box_iou(a: BBox, b: BBox) -> float:
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[int]:
    """Greedy class-aware NMS over box IoU; returns kept indices.

    Detections are visited in descending ``fcos_score`` order (ties by lower
    original index); each kept detection suppresses remaining ones of the same
    class whose box IoU exceeds the threshold.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    n = len(dets)
    if n == 0:
        return []
    x0 = np.array([d.box.x0 for d in dets])
    y0 = np.array([d.box.y0 for d in dets])
    x1 = np.array([d.box.x1 for d in dets])
    y1 = np.array([d.box.y1 for d in dets])
    areas = np.maximum(x1 - x0, 0.0) * np.maximum(y1 - y0, 0.0)
    classes = np.array([d.class_id for d in dets])

    order = sorted(range(n), key=lambda i: (-dets[i].fcos_score, i))
    alive = np.ones(n, dtype=bool)
    kept: List[int] = []
    for i in order:
        if not alive[i]:
            continue
        kept.append(i)
        alive[i] = False
        cand = alive & (classes == classes[i])
        if not cand.any():
            continue
        ix = np.minimum(x1[cand], x1[i]) - np.maximum(x0[cand], x0[i])
        iy = np.minimum(y1[cand], y1[i]) - np.maximum(y0[cand], y0[i])
        inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
        iou = inter / (areas[cand] + areas[i] - inter)
        idx = np.nonzero(cand)[0]
        alive[idx[iou > iou_threshold]] = False
    return kept


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks; empty-vs-empty is 0."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a & b)) / union


def confidence_targets(pred: InstanceMask, gt_mask: np.ndarray, eps: float = 1.0) -> tuple[float, float]:
    """Training targets for the confidence head: (mask IoU, silhouette Dice).

    The silhouette target compares the rims of the predicted and ground-truth
    binary masks, each treated as a two-segment mask/background label map.
    Occlusion lowers the IoU target because the ground-truth mask covers the
    whole object while the prediction competes for visible pixels.
    """
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred.binary.shape != gt_mask.shape:
        raise ValueError(f"shape mismatch: pred {pred.binary.shape} vs gt {gt_mask.shape}")
    iou_target = mask_iou(pred.binary, gt_mask)
    sil_target = dice_score(
        mask_silhouette(pred.binary).astype(np.float64), mask_silhouette(gt_mask), eps
    )
    return iou_target, sil_target


def mask_score(fcos: float, iou: float, alpha: float) -> float:
    """Fused ranking confidence ``alpha * fcos + (1 - alpha) * iou``."""
    for name, v in (("fcos", fcos), ("iou", iou), ("alpha", alpha)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    return alpha * fcos + (1.0 - alpha) * iou


def _duplicate_groups(instances: Sequence[ScoredInstance], dup_iou: float) -> List[List[int]]:
    """Connected components of the 'possibly the same instance' relation."""
    n = len(instances)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if instances[i].detection.class_id != instances[j].detection.class_id:
                continue
            if mask_iou(instances[i].mask.binary, instances[j].mask.binary) >= dup_iou:
                parent[find(i)] = find(j)

    groups: dict[int, List[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [g for g in groups.values() if len(g) > 1]


def rank_instances(
    instances: Sequence[ScoredInstance], alpha: float, dup_iou: float
) -> List[int]:
    """Deterministic ranking order (best first) as an index list.

    Primary order is descending fused mask score (ties by lower index). Within
    every connected group of duplicates (same class, pairwise mask IoU >=
    ``dup_iou``), members are reordered by descending silhouette score across
    the positions the group occupies, overriding the mask score.
    """
    if not 0.0 < dup_iou <= 1.0:
        raise ValueError(f"dup_iou must lie in (0, 1], got {dup_iou}")
    scores = [
        mask_score(inst.detection.fcos_score, inst.iou_score, alpha) for inst in instances
    ]
    order = sorted(range(len(instances)), key=lambda i: (-scores[i], i))
    if len(instances) < 2:
        return order

    pos_of = {idx: pos for pos, idx in enumerate(order)}
    for group in _duplicate_groups(instances, dup_iou):
        slots = sorted(pos_of[i] for i in group)
        by_quality = sorted(
            group,
            key=lambda i: (-instances[i].silhouette_score, -scores[i], i),
        )
        for pos, idx in zip(slots, by_quality):
            order[pos] = idx
    return order
