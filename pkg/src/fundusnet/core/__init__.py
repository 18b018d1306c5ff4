from .tensor import Tensor, ConvGeometry, as_tensor, resolve_dtype
from .ops import (
    ArgIndices,
    conv2d,
    conv2d_reference,
    relu,
    maxpool2,
    fully_connected,
    softmax,
    cross_entropy,
    cross_entropy_grad,
    softmax_cross_entropy_grad,
)
from .tape import Tape, TapeEntry, TapeGradients, backward
from .gradcheck import finite_diff_grad, finite_differences, relative_error

__all__ = [
    "Tensor",
    "ConvGeometry",
    "as_tensor",
    "resolve_dtype",
    "ArgIndices",
    "conv2d",
    "conv2d_reference",
    "relu",
    "maxpool2",
    "fully_connected",
    "softmax",
    "cross_entropy",
    "cross_entropy_grad",
    "softmax_cross_entropy_grad",
    "Tape",
    "TapeEntry",
    "TapeGradients",
    "backward",
    "finite_diff_grad",
    "finite_differences",
    "relative_error",
]
