from dataclasses import dataclass
from typing import Literal, TypeAlias

import numpy as np

from ..errors import GeometryError, ShapeError

# Dense row-major arrays are the common currency of every layer. numpy already
# guarantees product(shape) == size and the row-major offset mapping, so the
# tensor type is the ndarray itself and this module only adds the checks.
Tensor: TypeAlias = np.ndarray

Precision = Literal["single", "double"]

DTYPES: dict[str, np.dtype] = {
    "single": np.dtype(np.float32),
    "double": np.dtype(np.float64),
}


def resolve_dtype(precision: Precision | str | np.dtype) -> np.dtype:
    if isinstance(precision, str) and precision in DTYPES:
        return DTYPES[precision]
    dtype = np.dtype(precision)
    if dtype not in DTYPES.values():
        raise TypeError(f"unsupported tensor dtype {dtype}; use float32 or float64")
    return dtype


def as_tensor(values, precision: Precision | str | np.dtype = "single") -> Tensor:
    """Copy ``values`` into a C-contiguous tensor of the requested precision."""
    tensor = np.ascontiguousarray(values, dtype=resolve_dtype(precision))
    if tensor.ndim == 0:
        raise ShapeError("tensors need at least one axis")
    if any(extent < 1 for extent in tensor.shape):
        raise ShapeError(f"all extents must be >= 1, got shape {tensor.shape}")
    return tensor


def require_rank(name: str, tensor: Tensor, rank: int) -> None:
    if tensor.ndim != rank:
        raise ShapeError(
            f"{name} must have rank {rank}, got shape {tuple(tensor.shape)}"
        )


@dataclass(frozen=True)
class ConvGeometry:
    kernel_h: int
    kernel_w: int
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.kernel_h < 1 or self.kernel_w < 1:
            raise GeometryError(
                f"kernel extents must be >= 1, got {self.kernel_h}x{self.kernel_w}"
            )
        if self.stride < 1:
            raise GeometryError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise GeometryError(f"padding must be >= 0, got {self.padding}")

    def output_extent(self, height: int, width: int) -> tuple[int, int]:
        """floor((in + 2*padding - kernel) / stride) + 1 along both axes."""
        out_h = (height + 2 * self.padding - self.kernel_h) // self.stride + 1
        out_w = (width + 2 * self.padding - self.kernel_w) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise GeometryError(
                f"kernel {self.kernel_h}x{self.kernel_w} (stride {self.stride}, "
                f"padding {self.padding}) does not fit a {height}x{width} input"
            )
        return out_h, out_w
