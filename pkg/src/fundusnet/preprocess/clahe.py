"""Contrast-limited adaptive histogram equalisation.

Stages: per-tile histogram, clipping with uniform redistribution, look-up table
from the clipped CDF, then bilinear interpolation between tile-centre tables.
"""

import logging
import math

import numpy as np

from ..errors import EmptyHistogramError, ShapeError
from .config import EnhanceConfig, check_clip_fraction
from .filters import ImageU8, as_image, to_u8

logger = logging.getLogger(__name__)

BINS = 256
IDENTITY_LUT = np.arange(BINS, dtype=np.uint8)
LUMA = np.array([0.299, 0.587, 0.114])


def histogram256(region: np.ndarray) -> np.ndarray:
    """Tally of each 8-bit intensity; sums to the region's pixel count."""
    return np.bincount(np.asarray(region, dtype=np.uint8).reshape(-1), minlength=BINS).astype(np.int64)


def clip_level(clip_fraction: float, region_pixels: int) -> int:
    check_clip_fraction(clip_fraction)
    return max(1, math.floor(clip_fraction * region_pixels + 0.5))


def clip_histogram_at(counts: np.ndarray, level: int) -> np.ndarray:
    """Cap every bin at ``level`` and hand the excess back uniformly in one pass.

    The excess is split ``excess // bins`` to every bin; the remainder ``r`` goes
    one count each to the first ``r`` bins. Works for any bin count.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if level < 1:
        raise ValueError(f"clip level must be >= 1, got {level}")
    if np.any(counts < 0):
        raise ValueError("histogram counts must be non-negative")
    clipped = np.minimum(counts, level)
    excess = int(counts.sum() - clipped.sum())
    share, remainder = divmod(excess, counts.size)
    clipped += share
    clipped[:remainder] += 1
    return clipped


def clip_histogram(h: np.ndarray, clip_fraction: float, region_pixels: int) -> np.ndarray:
    return clip_histogram_at(h, clip_level(clip_fraction, region_pixels))


def build_lut(h: np.ndarray) -> np.ndarray:
    """LUT[v] = round(255 * CDF(v)), monotone non-decreasing."""
    counts = np.asarray(h, dtype=np.int64)
    total = int(counts.sum())
    if total < 1:
        raise EmptyHistogramError("cannot build a look-up table from an empty histogram")
    cdf = np.cumsum(counts) / total
    return np.floor(255 * cdf + 0.5).astype(np.uint8)


def _tile_edges(extent: int, tiles: int) -> np.ndarray:
    return np.array([i * extent // tiles for i in range(tiles + 1)])


def _interp_coords(extent: int, edges: np.ndarray):
    """Per-pixel lower tile index, upper tile index and weight towards the upper."""
    centres = (edges[:-1] + edges[1:] - 1) / 2
    tiles = centres.size
    pos = np.interp(np.arange(extent), centres, np.arange(tiles, dtype=np.float64))
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, tiles - 1)
    return lo, hi, pos - lo


def tile_luts(channel: np.ndarray, cfg: EnhanceConfig) -> np.ndarray:
    rows, cols = cfg.tile_grid
    y_edges = _tile_edges(channel.shape[0], rows)
    x_edges = _tile_edges(channel.shape[1], cols)
    luts = np.empty((rows, cols, BINS), dtype=np.uint8)
    for i in range(rows):
        for j in range(cols):
            tile = channel[y_edges[i] : y_edges[i + 1], x_edges[j] : x_edges[j + 1]]
            counts = histogram256(tile)
            if np.count_nonzero(counts) == 1:
                # a flat tile carries no contrast to redistribute
                luts[i, j] = IDENTITY_LUT
                continue
            luts[i, j] = build_lut(clip_histogram(counts, cfg.clip_fraction, tile.size))
    return luts


def clahe_channel(channel: np.ndarray, cfg: EnhanceConfig) -> np.ndarray:
    rows, cols = cfg.tile_grid
    height, width = channel.shape
    if height < rows or width < cols:
        raise ShapeError(
            f"image {height}x{width} is smaller than the {rows}x{cols} tile grid"
        )
    luts = tile_luts(channel, cfg).astype(np.float64)
    y0, y1, wy = _interp_coords(height, _tile_edges(height, rows))
    x0, x1, wx = _interp_coords(width, _tile_edges(width, cols))
    y0, y1, wy = y0[:, None], y1[:, None], wy[:, None]
    x0, x1, wx = x0[None, :], x1[None, :], wx[None, :]
    top = luts[y0, x0, channel] * (1 - wx) + luts[y0, x1, channel] * wx
    bottom = luts[y1, x0, channel] * (1 - wx) + luts[y1, x1, channel] * wx
    return to_u8(top * (1 - wy) + bottom * wy)


def clahe(img: ImageU8, cfg: EnhanceConfig) -> ImageU8:
    img = as_image(img)
    if cfg.channel_mode == "per-channel":
        return np.stack([clahe_channel(img[..., c], cfg) for c in range(3)], axis=-1)

    luma = img.astype(np.float64) @ LUMA
    enhanced = clahe_channel(to_u8(luma), cfg).astype(np.float64)
    logger.debug("luminance CLAHE mean shift %.3f", float((enhanced - luma).mean()))
    return to_u8(img + (enhanced - luma)[..., None])
