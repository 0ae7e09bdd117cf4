"""Silhouette extraction from panoptic label maps and the Dice silhouette loss.

A silhouette pixel is a labeled pixel with at least one 4-neighbor carrying a
different segment id. This is the exact nonzero set of the 4-neighbor
Laplacian applied to per-segment indicator maps, so junction lines come out
one pixel thick on each side. Void pixels (id 0) never become silhouette
pixels themselves but do trigger silhouettes on adjacent labeled pixels, and
image borders do not count as junctions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping

import numpy as np

VOID_ID = 0

_TARGETS = ("things", "stuff", "all")


@dataclass(frozen=True)
class SegmentInfo:
    """Per-segment metadata: category, thing/stuff flag, pixel area."""

    segment_id: int
    category_id: int
    is_thing: bool
    area: int


class SegmentTable:
    """Mapping from segment id to :class:`SegmentInfo`; id 0 is reserved for void."""

    def __init__(self, entries: Iterable[SegmentInfo] = ()) -> None:
        self._entries: Dict[int, SegmentInfo] = {}
        for info in entries:
            self.add(info)

    def add(self, info: SegmentInfo) -> None:
        if info.segment_id == VOID_ID:
            raise ValueError("segment id 0 is reserved for void")
        if info.segment_id in self._entries:
            raise ValueError(f"duplicate segment id {info.segment_id}")
        self._entries[info.segment_id] = info

    def __contains__(self, segment_id: int) -> bool:
        return int(segment_id) in self._entries

    def __getitem__(self, segment_id: int) -> SegmentInfo:
        return self._entries[int(segment_id)]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SegmentTable):
            return NotImplemented
        return self._entries == other._entries

    @property
    def infos(self) -> tuple[SegmentInfo, ...]:
        return tuple(self._entries[i] for i in sorted(self._entries))

    def categories(self) -> Dict[int, bool]:
        """Category id -> is_thing, raising on thing/stuff conflicts."""
        out: Dict[int, bool] = {}
        for info in self._entries.values():
            prev = out.setdefault(info.category_id, info.is_thing)
            if prev != info.is_thing:
                raise ValueError(f"category {info.category_id} is both thing and stuff")
        return out

    def validate_map(self, ids: np.ndarray) -> None:
        """Check the label map only uses known ids and areas agree with the map."""
        present, counts = np.unique(ids, return_counts=True)
        count_of = dict(zip(present.tolist(), counts.tolist()))
        for sid in present.tolist():
            if sid != VOID_ID and sid not in self._entries:
                raise ValueError(f"label map id {sid} missing from segment table")
        for sid, info in self._entries.items():
            if info.area != count_of.get(sid, 0):
                raise ValueError(
                    f"segment {sid} area {info.area} != map pixel count {count_of.get(sid, 0)}"
                )


@dataclass(frozen=True)
class SilhouettePair:
    """Thing- and stuff-restricted silhouette masks of one label map."""

    things: np.ndarray
    stuff: np.ndarray


def _require_label_map(ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(ids)
    if ids.ndim != 2 or ids.size == 0:
        raise ValueError(f"expected non-empty (H, W) label map, got shape {ids.shape}")
    return ids


def _junctions(ids: np.ndarray) -> np.ndarray:
    """Pixels whose segment id differs from at least one 4-neighbor."""
    edge = np.zeros(ids.shape, dtype=bool)
    dh = ids[:, 1:] != ids[:, :-1]
    edge[:, 1:] |= dh
    edge[:, :-1] |= dh
    dv = ids[1:, :] != ids[:-1, :]
    edge[1:, :] |= dv
    edge[:-1, :] |= dv
    return edge


def extract_silhouette(ids: np.ndarray, table: SegmentTable, target: str = "all") -> np.ndarray:
    """Silhouette mask of a label map, optionally restricted to things or stuff.

    ``target="things"`` keeps junction pixels belonging to thing segments,
    ``"stuff"`` those belonging to stuff segments, ``"all"`` their union.
    """
    ids = _require_label_map(ids)
    if target not in _TARGETS:
        raise ValueError(f"target must be one of {_TARGETS}, got {target!r}")
    present = np.unique(ids)
    missing = [int(s) for s in present if s != VOID_ID and s not in table]
    if missing:
        raise ValueError(f"label map ids missing from segment table: {missing}")

    sil = _junctions(ids) & (ids != VOID_ID)
    if target == "all":
        return sil
    want_thing = target == "things"
    selected = np.array(
        [s for s in present.tolist() if s != VOID_ID and table[s].is_thing == want_thing],
        dtype=ids.dtype,
    )
    return sil & np.isin(ids, selected)


def silhouette_pair(ids: np.ndarray, table: SegmentTable) -> SilhouettePair:
    return SilhouettePair(
        things=extract_silhouette(ids, table, "things"),
        stuff=extract_silhouette(ids, table, "stuff"),
    )


def mask_silhouette(mask: np.ndarray) -> np.ndarray:
    """Silhouette of a single binary mask, viewed as a two-segment label map.

    Both the mask and the background count as real segments (no void), so the
    boundary is set on both sides of the rim.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"expected non-empty (H, W) mask, got shape {mask.shape}")
    return _junctions(mask.astype(np.int32))


def _check_dice_inputs(p: np.ndarray, g: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=bool)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: p {p.shape} vs g {g.shape}")
    if p.ndim != 2 or p.size == 0:
        raise ValueError(f"expected non-empty (H, W) grids, got shape {p.shape}")
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("p values must lie in [0, 1]")
    return p, g


def dice_score(p: np.ndarray, g: np.ndarray, eps: float = 1.0) -> float:
    """Smoothed Dice overlap ``(2*sum(p*g) + eps) / (sum(p^2) + sum(g^2) + eps)``.

    ``p`` holds probabilities in [0, 1], ``g`` is a binary mask. With eps > 0
    the score lies in (0, 1] and equals 1 exactly when p == g.
    """
    p, g = _check_dice_inputs(p, g, eps)
    gf = g.astype(np.float64)
    num = 2.0 * float(np.dot(p.ravel(), gf.ravel())) + eps
    den = float(np.dot(p.ravel(), p.ravel())) + float(gf.sum()) + eps
    return num / den


def silhouette_loss(p: np.ndarray, g: np.ndarray, eps: float = 1.0) -> float:
    """One minus the Dice silhouette score; 0 at a perfect match."""
    return 1.0 - dice_score(p, g, eps)


def dice_grad(p: np.ndarray, g: np.ndarray, eps: float = 1.0) -> np.ndarray:
    """Analytic per-pixel derivative of :func:`silhouette_loss` w.r.t. ``p``.

    With D = sum(p^2) + sum(g^2) + eps and S the Dice score, the derivative at
    pixel i is ``(2 p_i S - 2 g_i) / D``.
    """
    p, g = _check_dice_inputs(p, g, eps)
    gf = g.astype(np.float64)
    den = float(np.dot(p.ravel(), p.ravel())) + float(gf.sum()) + eps
    score = (2.0 * float(np.dot(p.ravel(), gf.ravel())) + eps) / den
    return (2.0 * p * score - 2.0 * gf) / den
