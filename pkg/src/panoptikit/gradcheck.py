"""Finite-difference verification of the analytic loss gradients."""
from __future__ import annotations

from typing import Callable, Dict

import numpy as np

from .losses import (
    IGNORE_LABEL,
    mse,
    mse_grad,
    pixel_cross_entropy,
    pixel_cross_entropy_grad,
    soft_iou_grad,
    soft_iou_loss,
)
from .silhouette import dice_grad, silhouette_loss


def central_difference(loss: Callable[[np.ndarray], float], x: np.ndarray, h: float) -> np.ndarray:
    """Central finite differences of a scalar loss w.r.t. every entry of ``x``."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = loss(x)
        flat[i] = orig - h
        lo = loss(x)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute deviation over the max gradient magnitude."""
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


def run_gradient_suites(
    n_cases: int = 100, size: int = 8, h: float = 1e-5, seed: int = 0
) -> Dict[str, float]:
    """Max relative error of each analytic gradient across seeded random cases."""
    worst: Dict[str, float] = {"dice": 0.0, "soft_iou": 0.0, "cross_entropy": 0.0, "mse": 0.0}
    for case in range(n_cases):
        rng = np.random.default_rng(seed + case)
        p = rng.uniform(0.05, 0.95, size=(size, size))
        g = rng.random((size, size)) < 0.5

        # p stays in (h, 1 - h) so the probed values remain valid inputs
        ana = dice_grad(p, g, eps=1.0)
        num = central_difference(lambda x: silhouette_loss(x, g, 1.0), p.copy(), h)
        worst["dice"] = max(worst["dice"], relative_error(ana, num))

        ana = soft_iou_grad(p, g)
        num = central_difference(lambda x: soft_iou_loss(x, g), p.copy(), h)
        worst["soft_iou"] = max(worst["soft_iou"], relative_error(ana, num))

        c = 4
        logits = rng.normal(0.0, 2.0, size=(c, size, size))
        labels = rng.integers(0, c, size=(size, size))
        labels[rng.random((size, size)) < 0.1] = IGNORE_LABEL
        ana = pixel_cross_entropy_grad(logits, labels)
        num = central_difference(lambda x: pixel_cross_entropy(x, labels), logits.copy(), h)
        worst["cross_entropy"] = max(worst["cross_entropy"], relative_error(ana, num))

        pred = rng.normal(0.0, 1.0, size=size)
        target = rng.normal(0.0, 1.0, size=size)
        ana = mse_grad(pred, target)
        num = central_difference(lambda x: mse(x, target), pred.copy(), h)
        worst["mse"] = max(worst["mse"], relative_error(ana, num))
    return worst
