"""Attention-blend mask composition.

The composition pipeline turns a per-detection attention vector plus the
shared whole-image basis maps into an image-sized instance probability mask:

    crop bases inside the box -> attention score maps (reshape, upsample,
    channel softmax) -> weighted channel sum -> sigmoid -> paste into image
    frame -> threshold.

Attention score maps are normalized with a softmax across the basis channel,
so the blended logits are a per-pixel convex combination of the cropped bases.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import BBox, paste_mask, resize_bilinear, roi_align_crop


@dataclass(frozen=True)
class BlendParams:
    """Knobs of the composition pipeline; defaults are config-exposed."""

    n_bases: int = 4
    native_res: int = 14
    mask_res: int = 56
    samples_per_bin: int = 2
    mask_threshold: float = 0.5


@dataclass
class InstanceMask:
    """Image-sized instance mask: probabilities, thresholded binary, source box."""

    probs: np.ndarray  # (H, W) float in [0, 1]
    binary: np.ndarray  # (H, W) bool, probs >= threshold
    box: BBox

    def with_probs(self, probs: np.ndarray, threshold: float) -> "InstanceMask":
        return InstanceMask(probs=probs, binary=probs >= threshold, box=self.box)


def attention_scores(att: np.ndarray, n_bases: int, native_res: int, out_res: int) -> np.ndarray:
    """Attention vector -> per-basis score maps summing to 1 at every pixel.

    The flat vector is reshaped to ``(n_bases, native_res, native_res)``,
    each map is bilinearly upsampled to ``out_res`` and a softmax is taken
    across the basis channel per pixel.
    """
    att = np.asarray(att, dtype=np.float64).ravel()
    if n_bases < 1 or native_res < 1:
        raise ValueError("n_bases and native_res must be >= 1")
    if att.size != n_bases * native_res * native_res:
        raise ValueError(
            f"attention length {att.size} != n_bases*native_res^2 = {n_bases * native_res ** 2}"
        )
    if not np.isfinite(att).all():
        raise ValueError("attention values must be finite")
    if out_res < native_res:
        raise ValueError(f"out_res {out_res} must be >= native_res {native_res}")

    maps = att.reshape(n_bases, native_res, native_res)
    up = resize_bilinear(maps, out_res, out_res)
    shifted = up - up.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def blend_logits(scores: np.ndarray, crop: np.ndarray) -> np.ndarray:
    """Per-pixel weighted sum of cropped bases: ``sum_k scores[k] * crop[k]``."""
    scores = np.asarray(scores, dtype=np.float64)
    crop = np.asarray(crop, dtype=np.float64)
    if scores.ndim != 3 or scores.shape != crop.shape:
        raise ValueError(f"shape mismatch: scores {scores.shape} vs crop {crop.shape}")
    return (scores * crop).sum(axis=0)


def compose_instance(
    att: np.ndarray,
    bases: np.ndarray,
    box: BBox,
    image_h: int,
    image_w: int,
    params: BlendParams = BlendParams(),
) -> InstanceMask:
    """Full composition chain from attention vector and bases to an instance mask.

    The sigmoid is applied at mask resolution and the resulting probabilities
    are pasted (bilinearly) into the image frame, then thresholded. Pasting
    the logits first and applying the sigmoid afterwards would differ only at
    resampled boundary pixels; this order is the documented convention.
    """
    bases = np.asarray(bases, dtype=np.float64)
    if bases.ndim != 3 or bases.shape[0] != params.n_bases:
        raise ValueError(
            f"expected bases of shape ({params.n_bases}, H, W), got {bases.shape}"
        )
    box.require_valid()
    r = params.mask_res
    crop = roi_align_crop(bases, box, r, r, params.samples_per_bin)
    scores = attention_scores(att, params.n_bases, params.native_res, r)
    logits = blend_logits(scores, crop)
    small = _sigmoid(logits)
    probs = paste_mask(small, box, image_h, image_w)
    return InstanceMask(probs=probs, binary=probs >= params.mask_threshold, box=box)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow-safe on both tails
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out
