import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Sequence

from .clahe import clahe
from .config import EnhanceConfig
from .filters import ImageU8, hybrid_filter, resize_bilinear

logger = logging.getLogger(__name__)


def enhance(
    img: ImageU8, cfg: EnhanceConfig, size: tuple[int, int] | None = None
) -> ImageU8:
    """Hybrid filter, enhanced CLAHE, then an optional resize to ``size`` (H, W)."""
    out = clahe(hybrid_filter(img, cfg), cfg)
    if size is not None:
        out = resize_bilinear(out, *size)
    return out


def enhance_batch(
    images: Sequence[ImageU8],
    cfg: EnhanceConfig,
    size: tuple[int, int] | None = None,
    workers: int = 1,
) -> list[ImageU8]:
    """Enhance every image; output order always equals input order."""
    job = partial(enhance, cfg=cfg, size=size)
    if workers <= 1 or len(images) <= 1:
        return [job(img) for img in images]
    logger.info("enhancing %d images with %d workers", len(images), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, images, chunksize=max(1, len(images) // (4 * workers))))
