"""Greedy score-ordered panoptic assembly.

Ranked instances claim pixels first come, first served; each pixel ends up in
exactly one segment. Instances that keep too little of their mask after
occlusion are discarded outright (their tentative pixels are released).
Remaining pixels go to the dominant stuff class, unless the "other" channel
dominates, in which case they stay void. Small stuff segments are voided.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .scoring import ScoredInstance, mask_score, rank_instances
from .silhouette import VOID_ID, SegmentInfo, SegmentTable

STUFF_AREA_REFERENCE = 640 * 480


@dataclass(frozen=True)
class FusionParams:
    """Admission and survival thresholds for the greedy merge.

    ``min_stuff_area`` is expressed at 640x480 scale and rescaled with the
    image area; ``min_instance_area`` is absolute pixels.
    """

    score_min: float = 0.4
    keep_frac: float = 0.5
    min_instance_area: int = 16
    min_stuff_area: int = 4096
    alpha: float = 0.8
    dup_iou: float = 0.5

    def __post_init__(self) -> None:
        for name in ("score_min", "keep_frac", "alpha"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.dup_iou <= 1.0:
            raise ValueError(f"dup_iou must lie in (0, 1], got {self.dup_iou}")
        if self.min_instance_area < 0 or self.min_stuff_area < 0:
            raise ValueError("area thresholds must be >= 0")

    def scaled_stuff_area(self, image_h: int, image_w: int) -> float:
        return self.min_stuff_area * (image_h * image_w) / STUFF_AREA_REFERENCE


@dataclass
class PanopticResult:
    """Per-pixel segment ids (0 = void) plus the segment table."""

    ids: np.ndarray  # (H, W) int32
    table: SegmentTable

    @property
    def shape(self) -> tuple[int, int]:
        return self.ids.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PanopticResult):
            return NotImplemented
        return bool(np.array_equal(self.ids, other.ids)) and self.table == other.table


def _canonical_order(instances: Sequence[ScoredInstance], alpha: float) -> List[int]:
    # Content-based sort so fusion is invariant to the input list order.
    def key(i: int):
        inst = instances[i]
        det = inst.detection
        return (
            -mask_score(det.fcos_score, inst.iou_score, alpha),
            -inst.silhouette_score,
            -det.fcos_score,
            det.class_id,
            det.box.x0,
            det.box.y0,
            det.box.x1,
            det.box.y1,
        )

    return sorted(range(len(instances)), key=key)


def fuse_panoptic(
    instances: Sequence[ScoredInstance],
    stuff_probs: np.ndarray,
    params: FusionParams,
    stuff_categories: Optional[Sequence[int]] = None,
) -> PanopticResult:
    """Merge ranked instance masks and stuff probabilities into one label map.

    ``stuff_probs`` is ``(N_stuff + 1, H, W)`` with the last channel holding
    the "other" (thing) probability; ``stuff_categories`` maps each stuff
    channel to its category id (defaults to ``1..N_stuff``).

    Steps: drop instances whose fused score falls below ``score_min``, rank
    the survivors, greedily claim unassigned pixels (discarding instances that
    keep less than ``keep_frac`` of their mask or fewer than
    ``min_instance_area`` pixels), then label leftover pixels with the argmax
    stuff class wherever it beats "other", voiding undersized stuff segments.
    """
    stuff_probs = np.asarray(stuff_probs, dtype=np.float64)
    if stuff_probs.ndim != 3 or stuff_probs.shape[0] < 1:
        raise ValueError(f"expected (N_stuff+1, H, W) stuff probabilities, got {stuff_probs.shape}")
    n_stuff = stuff_probs.shape[0] - 1
    h, w = stuff_probs.shape[1:]
    if stuff_categories is None:
        stuff_categories = tuple(range(1, n_stuff + 1))
    if len(stuff_categories) != n_stuff:
        raise ValueError(
            f"stuff_categories has {len(stuff_categories)} entries for {n_stuff} stuff channels"
        )
    for inst in instances:
        if inst.mask.binary.shape != (h, w):
            raise ValueError(
                f"instance mask shape {inst.mask.binary.shape} does not match image {(h, w)}"
            )

    canon = _canonical_order(instances, params.alpha)
    admitted = [
        i
        for i in canon
        if mask_score(instances[i].detection.fcos_score, instances[i].iou_score, params.alpha)
        >= params.score_min
    ]
    ranked = rank_instances([instances[i] for i in admitted], params.alpha, params.dup_iou)

    ids = np.zeros((h, w), dtype=np.int32)
    table = SegmentTable()
    next_id = 1
    for r in ranked:
        inst = instances[admitted[r]]
        total = int(np.count_nonzero(inst.mask.binary))
        if total == 0:
            continue
        claim = inst.mask.binary & (ids == VOID_ID)
        claimed = int(np.count_nonzero(claim))
        if claimed / total < params.keep_frac or claimed < params.min_instance_area:
            continue
        ids[claim] = next_id
        table.add(
            SegmentInfo(
                segment_id=next_id,
                category_id=inst.detection.class_id,
                is_thing=True,
                area=claimed,
            )
        )
        next_id += 1

    if n_stuff > 0:
        free = ids == VOID_ID
        stuff_only = stuff_probs[:n_stuff]
        best = np.argmax(stuff_only, axis=0)
        best_prob = np.take_along_axis(stuff_only, best[None], axis=0)[0]
        other_wins = stuff_probs[n_stuff] > best_prob
        assignable = free & ~other_wins
        min_area = params.scaled_stuff_area(h, w)
        for k, category in enumerate(stuff_categories):
            region = assignable & (best == k)
            area = int(np.count_nonzero(region))
            if area == 0 or area < min_area:
                continue
            ids[region] = next_id
            table.add(
                SegmentInfo(
                    segment_id=next_id, category_id=int(category), is_thing=False, area=area
                )
            )
            next_id += 1

    return PanopticResult(ids=ids, table=table)


def fuse_roundtrip_check(result: PanopticResult) -> bool:
    """True iff every pixel has exactly one assignment and table areas match the map."""
    present, counts = np.unique(result.ids, return_counts=True)
    count_of = dict(zip(present.tolist(), counts.tolist()))
    for sid in count_of:
        if sid != VOID_ID and sid not in result.table:
            return False
    for info in result.table.infos:
        if info.area != count_of.get(info.segment_id, 0):
            return False
    return True
