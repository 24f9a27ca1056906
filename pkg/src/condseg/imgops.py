"""Shared image-space helpers: resizing and flips.

Bilinear resizing uses half-pixel source centers (the common
align_corners=False convention); nearest-neighbor is used for label masks
because labels are categorical. Both are pure numpy and deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def _source_coords(out_size: int, in_size: int) -> np.ndarray:
    return (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize [C,H,W] (or [H,W]) float data bilinearly."""
    if out_h < 1 or out_w < 1:
        raise DimensionError(f"invalid output size {out_h}x{out_w}")
    squeeze = image.ndim == 2
    img = image[None] if squeeze else image
    if img.ndim != 3:
        raise DimensionError(f"resize_bilinear expects [C,H,W] or [H,W], got {image.shape}")
    h, w = img.shape[1:]
    if (out_h, out_w) == (h, w):
        out = img.copy()
        return out[0] if squeeze else out

    ys = np.clip(_source_coords(out_h, h), 0.0, h - 1.0)
    xs = np.clip(_source_coords(out_w, w), 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(img.dtype)
    wx = (xs - x0).astype(img.dtype)

    top = img[:, y0[:, None], x0[None, :]] * (1 - wx)[None, None, :] + \
        img[:, y0[:, None], x1[None, :]] * wx[None, None, :]
    bot = img[:, y1[:, None], x0[None, :]] * (1 - wx)[None, None, :] + \
        img[:, y1[:, None], x1[None, :]] * wx[None, None, :]
    out = top * (1 - wy)[None, :, None] + bot * wy[None, :, None]
    out = out.astype(img.dtype, copy=False)
    return out[0] if squeeze else out


def resize_nearest(mask: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an [H,W] label mask with nearest-neighbor sampling."""
    if mask.ndim != 2:
        raise DimensionError(f"resize_nearest expects [H,W], got {mask.shape}")
    h, w = mask.shape
    if (out_h, out_w) == (h, w):
        return mask.copy()
    ys = np.clip(np.floor(_source_coords(out_h, h) + 0.5).astype(np.int64), 0, h - 1)
    xs = np.clip(np.floor(_source_coords(out_w, w) + 0.5).astype(np.int64), 0, w - 1)
    return mask[ys[:, None], xs[None, :]].copy()


def hflip(arr: np.ndarray) -> np.ndarray:
    """Flip the trailing (width) axis; works for [C,H,W] and [H,W]."""
    return np.ascontiguousarray(arr[..., ::-1])
