from .config import EnhanceConfig, CLIP_FRACTION_MIN, CLIP_FRACTION_MAX
from .filters import ImageU8, as_image, hybrid_filter, resize_bilinear
from .clahe import histogram256, clip_histogram, clip_histogram_at, build_lut, clahe
from .pipeline import enhance, enhance_batch

__all__ = [
    "EnhanceConfig",
    "CLIP_FRACTION_MIN",
    "CLIP_FRACTION_MAX",
    "ImageU8",
    "as_image",
    "hybrid_filter",
    "resize_bilinear",
    "histogram256",
    "clip_histogram",
    "clip_histogram_at",
    "build_lut",
    "clahe",
    "enhance",
    "enhance_batch",
]
