"""Panoptic quality: segment matching, per-class TP/FP/FN accounting, aggregation.

Matching follows the standard rule: a predicted and a ground-truth segment of
the same category match when their IoU exceeds 0.5, which makes matches
unique. Ground-truth void pixels are excluded from the union, and an
unmatched prediction overlapping void on more than half of its area is not
counted as a false positive. Per class,

    PQ = iou_sum / (tp + fp/2 + fn/2),  SQ = iou_sum / tp,
    RQ = tp / (tp + fp/2 + fn/2)

and classes that never occur (tp + fp + fn == 0) are excluded from averages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .fusion import PanopticResult
from .silhouette import VOID_ID

_PAIR_SHIFT = np.int64(1) << np.int64(24)  # segment ids stay below 256^3


@dataclass
class PQStats:
    """Per-category match counts and the summed IoU of true positives."""

    categories: Dict[int, bool]  # category id -> is_thing
    tp: Dict[int, int] = field(default_factory=dict)
    fp: Dict[int, int] = field(default_factory=dict)
    fn: Dict[int, int] = field(default_factory=dict)
    iou_sum: Dict[int, float] = field(default_factory=dict)

    @classmethod
    def empty(cls, categories: Mapping[int, bool]) -> "PQStats":
        cats = dict(categories)
        zeros_i = {c: 0 for c in cats}
        zeros_f = {c: 0.0 for c in cats}
        return cls(categories=cats, tp=dict(zeros_i), fp=dict(zeros_i), fn=dict(zeros_i), iou_sum=zeros_f)


@dataclass(frozen=True)
class PQClassReport:
    pq: float
    sq: float
    rq: float
    tp: int
    fp: int
    fn: int
    iou_sum: float


@dataclass(frozen=True)
class PQReport:
    """Aggregated panoptic quality with thing/stuff splits and per-class detail."""

    pq: float
    sq: float
    rq: float
    pq_things: Optional[float]
    pq_stuff: Optional[float]
    per_class: Dict[int, PQClassReport]
    num_classes: int


def _check_same_shape(pred: PanopticResult, gt: PanopticResult) -> None:
    if pred.ids.shape != gt.ids.shape:
        raise ValueError(f"shape mismatch: pred {pred.ids.shape} vs gt {gt.ids.shape}")


def _segment_areas(ids: np.ndarray) -> Dict[int, int]:
    values, counts = np.unique(ids, return_counts=True)
    return dict(zip(values.tolist(), counts.tolist()))


def match_segments(pred: PanopticResult, gt: PanopticResult) -> List[Tuple[int, int, float]]:
    """All (pred_id, gt_id, iou) matches with same-category IoU > 0.5.

    IoU excludes ground-truth void from the union. The > 0.5 rule guarantees
    each segment appears in at most one match; the result is sorted by gt id.
    """
    _check_same_shape(pred, gt)
    pred_areas = _segment_areas(pred.ids)
    gt_areas = _segment_areas(gt.ids)

    combined = gt.ids.astype(np.int64) * _PAIR_SHIFT + pred.ids.astype(np.int64)
    pair_vals, pair_counts = np.unique(combined, return_counts=True)
    inter: Dict[Tuple[int, int], int] = {}
    for v, c in zip(pair_vals.tolist(), pair_counts.tolist()):
        inter[(v // int(_PAIR_SHIFT), v % int(_PAIR_SHIFT))] = c

    void_overlap: Dict[int, int] = {}
    for (g, p), c in inter.items():
        if g == VOID_ID and p != VOID_ID:
            void_overlap[p] = c

    matches: List[Tuple[int, int, float]] = []
    for (g, p), c in inter.items():
        if g == VOID_ID or p == VOID_ID:
            continue
        if gt.table[g].category_id != pred.table[p].category_id:
            continue
        union = pred_areas[p] + gt_areas[g] - c - void_overlap.get(p, 0)
        iou = c / union
        if iou > 0.5:
            matches.append((p, g, iou))

    matched_p = [m[0] for m in matches]
    matched_g = [m[1] for m in matches]
    assert len(set(matched_p)) == len(matched_p) and len(set(matched_g)) == len(matched_g)
    return sorted(matches, key=lambda m: m[1])


def image_stats(
    pred: PanopticResult, gt: PanopticResult, categories: Mapping[int, bool]
) -> PQStats:
    """Per-category TP/FP/FN and matched-IoU sums for one image pair."""
    _check_same_shape(pred, gt)
    for table in (pred.table, gt.table):
        for info in table.infos:
            if info.category_id not in categories:
                raise ValueError(f"category {info.category_id} missing from the registry")

    stats = PQStats.empty(categories)
    matches = match_segments(pred, gt)
    matched_pred = {p for p, _, _ in matches}
    matched_gt = {g for _, g, _ in matches}

    for p, g, iou in matches:
        cat = gt.table[g].category_id
        stats.tp[cat] += 1
        stats.iou_sum[cat] += iou

    for info in gt.table.infos:
        if info.segment_id not in matched_gt:
            stats.fn[info.category_id] += 1

    pred_areas = _segment_areas(pred.ids)
    void_mask = gt.ids == VOID_ID
    for info in pred.table.infos:
        if info.segment_id in matched_pred:
            continue
        area = pred_areas.get(info.segment_id, 0)
        if area == 0:
            continue
        void_overlap = int(np.count_nonzero(void_mask & (pred.ids == info.segment_id)))
        if void_overlap / area > 0.5:
            continue
        stats.fp[info.category_id] += 1
    return stats


def pq_reduce(a: PQStats, b: PQStats) -> PQStats:
    """Field-wise sum of two stats; associative and commutative."""
    if a.categories != b.categories:
        raise ValueError("cannot reduce stats over different category registries")
    out = PQStats.empty(a.categories)
    for c in a.categories:
        out.tp[c] = a.tp[c] + b.tp[c]
        out.fp[c] = a.fp[c] + b.fp[c]
        out.fn[c] = a.fn[c] + b.fn[c]
        out.iou_sum[c] = a.iou_sum[c] + b.iou_sum[c]
    return out


def report_from_stats(stats: PQStats) -> PQReport:
    per_class: Dict[int, PQClassReport] = {}
    for c in sorted(stats.categories):
        tp, fp, fn = stats.tp[c], stats.fp[c], stats.fn[c]
        if tp + fp + fn == 0:
            continue
        denom = tp + 0.5 * fp + 0.5 * fn
        sq = stats.iou_sum[c] / tp if tp > 0 else 0.0
        rq = tp / denom
        pq = stats.iou_sum[c] / denom
        per_class[c] = PQClassReport(pq=pq, sq=sq, rq=rq, tp=tp, fp=fp, fn=fn, iou_sum=stats.iou_sum[c])

    def mean(values: Sequence[float]) -> Optional[float]:
        return float(np.mean(values)) if values else None

    included = sorted(per_class)
    things = [per_class[c].pq for c in included if stats.categories[c]]
    stuff = [per_class[c].pq for c in included if not stats.categories[c]]
    overall_pq = mean([per_class[c].pq for c in included])
    overall_sq = mean([per_class[c].sq for c in included])
    overall_rq = mean([per_class[c].rq for c in included])
    return PQReport(
        pq=overall_pq if overall_pq is not None else 0.0,
        sq=overall_sq if overall_sq is not None else 0.0,
        rq=overall_rq if overall_rq is not None else 0.0,
        pq_things=mean(things),
        pq_stuff=mean(stuff),
        per_class=per_class,
        num_classes=len(included),
    )


def pq_evaluate(
    pairs: Sequence[Tuple[PanopticResult, PanopticResult]],
    categories: Mapping[int, bool],
) -> PQReport:
    """Accumulate stats over (pred, gt) pairs and aggregate into a report."""
    stats = PQStats.empty(categories)
    for pred, gt in pairs:
        stats = pq_reduce(stats, image_stats(pred, gt, categories))
    return report_from_stats(stats)
