import math

import numpy as np
from scipy import ndimage

from ..errors import ShapeError
from .config import EnhanceConfig

ImageU8 = np.ndarray


def as_image(img) -> ImageU8:
    """Validate an H x W x 3 8-bit image."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"expected an H x W x 3 image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"image extents must be >= 1, got {arr.shape[:2]}")
    if arr.dtype != np.uint8:
        raise TypeError(f"expected uint8 intensities, got {arr.dtype}")
    return arr


def to_u8(values: np.ndarray) -> ImageU8:
    # round half up, then clamp; never wraps
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets**2) / (2 * sigma**2))
    return weights / weights.sum()


def hybrid_filter(img: ImageU8, cfg: EnhanceConfig) -> ImageU8:
    """Median denoise then Gaussian smoothing, per channel, edge-replicated borders."""
    img = as_image(img)
    kernel = gaussian_kernel(cfg.gaussian_sigma)
    out = np.empty_like(img)
    for c in range(3):
        channel = ndimage.median_filter(img[..., c], size=cfg.median_window, mode="nearest")
        smooth = channel.astype(np.float64)
        smooth = ndimage.correlate1d(smooth, kernel, axis=0, mode="nearest")
        smooth = ndimage.correlate1d(smooth, kernel, axis=1, mode="nearest")
        out[..., c] = to_u8(smooth)
    return out


def _sample_positions(in_size: int, out_size: int):
    # half-pixel centres: src = (dst + 0.5) * in / out - 0.5
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    src = np.clip(src, 0, in_size - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, in_size - 1)
    return lo, hi, src - lo


def resize_bilinear(img: ImageU8, out_h: int, out_w: int) -> ImageU8:
    img = as_image(img)
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"output extents must be >= 1, got {out_h}x{out_w}")
    if (out_h, out_w) == img.shape[:2]:
        return img.copy()
    y0, y1, wy = _sample_positions(img.shape[0], out_h)
    x0, x1, wx = _sample_positions(img.shape[1], out_w)
    src = img.astype(np.float64)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
    bottom = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
    return to_u8(top * (1 - wy) + bottom * wy)
