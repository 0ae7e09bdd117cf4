"""Dense 2-D/3-D grids, boxes, and the bilinear kernels the mask pipeline builds on.

Coordinate conventions, used consistently by every kernel in this package:

* Continuous image coordinates span ``[0, W] x [0, H]``. Pixel ``(row, col)``
  occupies the unit square ``[col, col+1] x [row, row+1]``, so its center sits
  at ``(col + 0.5, row + 0.5)``.
* :func:`bilinear_sample` works in pixel-index space: the sample position
  ``(x, y)`` is measured in array-index units, so integer positions coincide
  with pixel centers. The crop/resize kernels convert continuous coordinates
  to index space by subtracting the half-pixel offset ("align corners false").
* Sample positions outside the grid clamp to the border pixel centers.

Grids are plain float ndarrays: 2-D grids are ``(H, W)``, 3-D grids are
channel-major ``(C, H, W)``. Binary masks are boolean ``(H, W)`` arrays.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates (x0, y0) to (x1, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.height)

    def is_valid(self) -> bool:
        coords = (self.x0, self.y0, self.x1, self.y1)
        return all(np.isfinite(c) for c in coords) and self.x1 > self.x0 and self.y1 > self.y0

    def require_valid(self) -> None:
        if not self.is_valid():
            raise ValueError(f"invalid box: {self}")


def _require_grid2(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError(f"expected non-empty (H, W) grid, got shape {grid.shape}")
    return grid


def _require_grid3(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 3 or grid.size == 0:
        raise ValueError(f"expected non-empty (C, H, W) grid, got shape {grid.shape}")
    return grid


def _gather_bilinear(chan: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Clamped bilinear gather of one channel at index-space positions."""
    h, w = chan.shape
    xs = np.clip(xs, 0.0, float(w - 1))
    ys = np.clip(ys, 0.0, float(h - 1))
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = chan[y0, x0] * (1.0 - fx) + chan[y0, x1] * fx
    bot = chan[y1, x0] * (1.0 - fx) + chan[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_sample(grid: np.ndarray, x: float, y: float) -> float:
    """Sample a 2-D grid at an index-space position.

    The result is the weighted average of the four nearest pixel centers;
    positions outside ``[0, W-1] x [0, H-1]`` clamp to the border centers, so
    the value at an integer position is exactly the stored pixel value.
    """
    grid = _require_grid2(grid)
    if not (np.isfinite(x) and np.isfinite(y)):
        raise ValueError(f"sample position must be finite, got ({x}, {y})")
    return float(_gather_bilinear(grid, np.asarray([x]), np.asarray([y]))[0])


def roi_align_crop(
    grid: np.ndarray,
    box: BBox,
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
) -> np.ndarray:
    """Crop a channel-major grid to ``(C, out_h, out_w)`` with ROI-align sampling.

    Each output bin averages ``samples_per_bin ** 2`` bilinear samples placed at
    regular fractional offsets inside the bin (no snapping to pixel centers).
    Continuous box coordinates are converted to index space with the half-pixel
    shift, so a full-extent box at native size with one sample per bin
    reproduces the input.
    """
    grid = _require_grid3(grid)
    box.require_valid()
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1, got {out_h}x{out_w}")
    if samples_per_bin < 1:
        raise ValueError(f"samples_per_bin must be >= 1, got {samples_per_bin}")

    s = samples_per_bin
    bin_w = box.width / out_w
    bin_h = box.height / out_h
    # Sub-sample positions in continuous coords, then shift to index space.
    xs = box.x0 + (np.arange(out_w * s) + 0.5) / s * bin_w - 0.5
    ys = box.y0 + (np.arange(out_h * s) + 0.5) / s * bin_h - 0.5
    gx, gy = np.meshgrid(xs, ys)

    out = np.empty((grid.shape[0], out_h, out_w), dtype=np.float64)
    for c in range(grid.shape[0]):
        dense = _gather_bilinear(grid[c], gx, gy)
        out[c] = dense.reshape(out_h, s, out_w, s).mean(axis=(1, 3))
    return out


def resize_bilinear(grid: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinearly resize a channel-major grid to ``(C, new_h, new_w)``."""
    grid = _require_grid3(grid)
    if new_h < 1 or new_w < 1:
        raise ValueError(f"target size must be >= 1, got {new_h}x{new_w}")
    c, h, w = grid.shape
    xs = (np.arange(new_w) + 0.5) * (w / new_w) - 0.5
    ys = (np.arange(new_h) + 0.5) * (h / new_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    out = np.empty((c, new_h, new_w), dtype=np.float64)
    for k in range(c):
        out[k] = _gather_bilinear(grid[k], gx, gy)
    return out


def paste_mask(mask_probs: np.ndarray, box: BBox, image_h: int, image_w: int) -> np.ndarray:
    """Resize a small probability grid to a box's pixel extent inside an image.

    The box is rasterized to ``[floor(x0), ceil(x1)) x [floor(y0), ceil(y1))``
    clipped to the image; pixels outside the raster are zero. A box entirely
    outside the image yields an all-zero grid (with a warning, not an error).
    """
    mask_probs = _require_grid2(mask_probs)
    box.require_valid()
    out = np.zeros((image_h, image_w), dtype=np.float64)

    x_lo = max(int(np.floor(box.x0)), 0)
    y_lo = max(int(np.floor(box.y0)), 0)
    x_hi = min(int(np.ceil(box.x1)), image_w)
    y_hi = min(int(np.ceil(box.y1)), image_h)
    if x_lo >= x_hi or y_lo >= y_hi:
        warnings.warn(f"box {box} rasterizes outside the {image_h}x{image_w} image", RuntimeWarning)
        return out

    mh, mw = mask_probs.shape
    # Image pixel centers mapped into the mask's index space.
    cx = np.arange(x_lo, x_hi) + 0.5
    cy = np.arange(y_lo, y_hi) + 0.5
    mx = (cx - box.x0) / box.width * mw - 0.5
    my = (cy - box.y0) / box.height * mh - 0.5
    gx, gy = np.meshgrid(mx, my)
    out[y_lo:y_hi, x_lo:x_hi] = _gather_bilinear(mask_probs, gx, gy)
    return out
