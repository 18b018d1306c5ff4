import io
import logging
import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import CorruptImageError, ImageDecodeError, UnsupportedFormatError
from ..preprocess.filters import ImageU8, as_image

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("PNG", "JPEG")
SIGNATURES = {b"\x89PNG\r\n\x1a\n": "PNG", b"\xff\xd8\xff": "JPEG"}


def _sniff(data: bytes) -> str | None:
    for signature, name in SIGNATURES.items():
        if data.startswith(signature):
            return name
    return None


def process_exception(exc: Exception, data: bytes, source: str) -> ImageDecodeError:
    """Map a Pillow failure onto the fundusnet image errors."""
    if _sniff(data) is None and isinstance(exc, UnidentifiedImageError):
        return UnsupportedFormatError(f"{source}: not a PNG or JPEG image")
    return CorruptImageError(f"{source}: corrupt image stream ({exc})")


def decode_bytes(data: bytes, source: str = "<bytes>") -> ImageU8:
    try:
        with Image.open(io.BytesIO(data)) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise UnsupportedFormatError(f"{source}: unsupported image format {img.format}")
            img.load()
            rgb = img.convert("RGB")
    except ImageDecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise process_exception(e, data, source) from e
    return np.asarray(rgb, dtype=np.uint8).copy()


def decode_image(path: str | os.PathLike) -> ImageU8:
    """Decode a PNG/JPEG file to an H x W x 3 uint8 array; grayscale is expanded to RGB."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise ImageDecodeError(f"image not found: {path}") from e
    return decode_bytes(data, str(path))


def encode_png(img: ImageU8) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(as_image(img)).save(buffer, format="PNG")
    return buffer.getvalue()


def save_png(path: str | os.PathLike, img: ImageU8) -> Path:
    path = Path(path)
    path.write_bytes(encode_png(img))
    return path
