"""Mask-loss kernels beyond the silhouette loss: soft IoU, cross-entropy, MSE.

Each loss comes with its analytic gradient so the whole family can be checked
against central finite differences.
"""
from __future__ import annotations

import numpy as np

IGNORE_LABEL = -1


def _check_pair(p: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=bool)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: p {p.shape} vs g {g.shape}")
    if p.size == 0:
        raise ValueError("empty input")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("p values must lie in [0, 1]")
    return p, g


def soft_iou_loss(p: np.ndarray, g: np.ndarray) -> float:
    """``1 - sum(p*g) / (sum(p) + sum(g) - sum(p*g))``; 0 when both are empty."""
    p, g = _check_pair(p, g)
    gf = g.astype(np.float64)
    inter = float((p * gf).sum())
    union = float(p.sum()) + float(gf.sum()) - inter
    if union == 0.0:
        return 0.0
    return 1.0 - inter / union


def soft_iou_grad(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Analytic derivative of :func:`soft_iou_loss` w.r.t. ``p`` (zero when both empty)."""
    p, g = _check_pair(p, g)
    gf = g.astype(np.float64)
    inter = float((p * gf).sum())
    union = float(p.sum()) + float(gf.sum()) - inter
    if union == 0.0:
        return np.zeros_like(p)
    # d inter / d p_i = g_i ; d union / d p_i = 1 - g_i
    return -(gf * union - inter * (1.0 - gf)) / (union * union)


def _check_logits_labels(logits: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 3:
        raise ValueError(f"expected (C, H, W) logits, got shape {logits.shape}")
    if labels.shape != logits.shape[1:]:
        raise ValueError(f"labels shape {labels.shape} does not match logits {logits.shape}")
    c = logits.shape[0]
    bad = (labels != IGNORE_LABEL) & ((labels < 0) | (labels >= c))
    if bad.any():
        raise ValueError(f"labels must lie in [0, {c}) or be {IGNORE_LABEL}")
    return logits, labels


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def pixel_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean ``-log softmax(logits)[label]`` over non-ignored pixels.

    ``labels`` holds class indices with :data:`IGNORE_LABEL` marking pixels to
    skip; an all-ignored map yields 0. Numerically stabilized by max shifting.
    """
    logits, labels = _check_logits_labels(logits, labels)
    valid = labels != IGNORE_LABEL
    n = int(valid.sum())
    if n == 0:
        return 0.0
    logp = _log_softmax(logits)
    ys, xs = np.nonzero(valid)
    picked = logp[labels[valid], ys, xs]
    return float(-picked.sum() / n)


def pixel_cross_entropy_grad(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Derivative of :func:`pixel_cross_entropy` w.r.t. the logits.

    ``(softmax - onehot) / n_valid`` at non-ignored pixels, zero elsewhere.
    """
    logits, labels = _check_logits_labels(logits, labels)
    valid = labels != IGNORE_LABEL
    n = int(valid.sum())
    grad = np.zeros_like(logits)
    if n == 0:
        return grad
    probs = np.exp(_log_softmax(logits))
    ys, xs = np.nonzero(valid)
    grad[:, ys, xs] = probs[:, ys, xs]
    grad[labels[valid], ys, xs] -= 1.0
    return grad / n


def mse(pred, target) -> float:
    """Mean squared difference of two equal-length scalar sequences."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {target.shape[0]}")
    if pred.size == 0:
        raise ValueError("empty input")
    diff = pred - target
    return float(np.dot(diff, diff) / diff.size)


def mse_grad(pred, target) -> np.ndarray:
    """Derivative of :func:`mse` w.r.t. ``pred``: ``2 (pred - target) / n``."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} vs {target.shape[0]}")
    if pred.size == 0:
        raise ValueError("empty input")
    return 2.0 * (pred - target) / pred.size
