"""Forward and backward kernels for every layer of the network.

All tensors are channels-last: images and feature maps are ``H x W x C`` and
convolution kernels are ``kh x kw x C x K``. Every function is pure; none of
them keeps state between calls.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateExtentError, NumericError, ShapeError
from .tensor import ConvGeometry, Tensor, require_rank

LOG_EPS = 1e-12

LossForm = Literal["binary_sum", "categorical"]
# spellings accepted from the command line and config files
LOSS_ALIASES = {"eq5": "binary_sum"}


# -------------------------------------------------------------------
#  convolution
# -------------------------------------------------------------------
def _check_conv(input: Tensor, kernels: Tensor, bias: Tensor, geom: ConvGeometry):
    require_rank("conv input", input, 3)
    require_rank("conv kernels", kernels, 4)
    kh, kw, kc, k = kernels.shape
    if (kh, kw) != (geom.kernel_h, geom.kernel_w):
        raise ShapeError(
            f"kernel extents {kh}x{kw} disagree with geometry "
            f"{geom.kernel_h}x{geom.kernel_w}"
        )
    if kc != input.shape[2]:
        raise ShapeError(
            f"kernel channels ({kc}) != input channels ({input.shape[2]})"
        )
    if bias.shape != (k,):
        raise ShapeError(f"bias shape {tuple(bias.shape)} != ({k},) output channels")
    return geom.output_extent(input.shape[0], input.shape[1])


def _pad(input: Tensor, padding: int) -> Tensor:
    if padding == 0:
        return input
    return np.pad(input, ((padding, padding), (padding, padding), (0, 0)))


def _windows(padded: Tensor, geom: ConvGeometry, out_h: int, out_w: int) -> Tensor:
    # (out_h, out_w, C, kh, kw) strided view, no copy
    view = sliding_window_view(padded, (geom.kernel_h, geom.kernel_w), axis=(0, 1))
    return view[:: geom.stride, :: geom.stride][:out_h, :out_w]


def conv2d(input: Tensor, kernels: Tensor, bias: Tensor, geom: ConvGeometry) -> Tensor:
    out_h, out_w = _check_conv(input, kernels, bias, geom)
    windows = _windows(_pad(input, geom.padding), geom, out_h, out_w)
    out = np.tensordot(windows, kernels, axes=([3, 4, 2], [0, 1, 2]))
    return out + bias


def conv2d_reference(
    input: Tensor, kernels: Tensor, bias: Tensor, geom: ConvGeometry
) -> Tensor:
    """Brute-force quadruple loop; the oracle the vectorised path is tested against."""
    out_h, out_w = _check_conv(input, kernels, bias, geom)
    padded = _pad(input, geom.padding)
    kh, kw, channels, k_out = kernels.shape
    out = np.zeros((out_h, out_w, k_out), dtype=np.result_type(input, kernels))
    for y in range(out_h):
        for x in range(out_w):
            for k in range(k_out):
                acc = bias[k]
                for dy in range(kh):
                    for dx in range(kw):
                        for c in range(channels):
                            acc += (
                                padded[y * geom.stride + dy, x * geom.stride + dx, c]
                                * kernels[dy, dx, c, k]
                            )
                out[y, x, k] = acc
    return out


def conv2d_backward(
    grad_out: Tensor, input: Tensor, kernels: Tensor, geom: ConvGeometry
) -> tuple[Tensor, Tensor, Tensor]:
    """Return (d_input, d_kernels, d_bias) for ``conv2d``."""
    out_h, out_w = geom.output_extent(input.shape[0], input.shape[1])
    if grad_out.shape != (out_h, out_w, kernels.shape[3]):
        raise ShapeError(
            f"conv upstream gradient {tuple(grad_out.shape)} != forward output "
            f"{(out_h, out_w, kernels.shape[3])}"
        )
    padded = _pad(input, geom.padding)
    windows = _windows(padded, geom, out_h, out_w)

    d_kernels = np.tensordot(windows, grad_out, axes=([0, 1], [0, 1]))
    d_kernels = np.ascontiguousarray(d_kernels.transpose(1, 2, 0, 3))
    d_bias = grad_out.sum(axis=(0, 1))

    s = geom.stride
    d_padded = np.zeros(padded.shape, dtype=np.result_type(grad_out, kernels))
    for dy in range(geom.kernel_h):
        for dx in range(geom.kernel_w):
            d_padded[
                dy : dy + s * (out_h - 1) + 1 : s,
                dx : dx + s * (out_w - 1) + 1 : s,
            ] += grad_out @ kernels[dy, dx].T
    p = geom.padding
    d_input = d_padded[p : p + input.shape[0], p : p + input.shape[1]]
    return np.ascontiguousarray(d_input), d_kernels, d_bias


# -------------------------------------------------------------------
#  activation
# -------------------------------------------------------------------
def relu(t: Tensor) -> Tensor:
    return np.maximum(t, 0).astype(t.dtype, copy=False)


def relu_backward(grad_out: Tensor, input: Tensor) -> Tensor:
    if grad_out.shape != input.shape:
        raise ShapeError(
            f"relu upstream gradient {tuple(grad_out.shape)} != input {tuple(input.shape)}"
        )
    return np.where(input > 0, grad_out, 0).astype(grad_out.dtype, copy=False)


# -------------------------------------------------------------------
#  pooling
# -------------------------------------------------------------------
@dataclass(frozen=True)
class ArgIndices:
    """Winning position of every 2x2 pooling window.

    ``winners`` holds the flat index (0..3, row-major inside the window) per
    output cell; ``rows``/``cols`` give the same winner in input coordinates.
    """

    input_shape: tuple[int, ...]
    winners: np.ndarray

    @property
    def rows(self) -> np.ndarray:
        h2 = self.winners.shape[0]
        return 2 * np.arange(h2)[:, None, None] + self.winners // 2

    @property
    def cols(self) -> np.ndarray:
        w2 = self.winners.shape[1]
        return 2 * np.arange(w2)[None, :, None] + self.winners % 2


def maxpool2(t: Tensor) -> tuple[Tensor, ArgIndices]:
    """2x2 max pooling, stride 2, no padding; odd trailing rows/columns are dropped."""
    require_rank("maxpool input", t, 3)
    height, width, channels = t.shape
    if height < 2 or width < 2:
        raise DegenerateExtentError(
            f"maxpool needs H >= 2 and W >= 2, got {height}x{width}"
        )
    h2, w2 = height // 2, width // 2
    blocks = (
        t[: 2 * h2, : 2 * w2]
        .reshape(h2, 2, w2, 2, channels)
        .transpose(0, 2, 4, 1, 3)
        .reshape(h2, w2, channels, 4)
    )
    winners = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, winners[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), ArgIndices(tuple(t.shape), winners)


def maxpool2_backward(grad_out: Tensor, arg: ArgIndices) -> Tensor:
    if grad_out.shape != arg.winners.shape:
        raise ShapeError(
            f"maxpool upstream gradient {tuple(grad_out.shape)} != pooled "
            f"{tuple(arg.winners.shape)}"
        )
    h2, w2, channels = grad_out.shape
    scattered = np.zeros((h2, w2, channels, 4), dtype=grad_out.dtype)
    np.put_along_axis(scattered, arg.winners[..., None], grad_out[..., None], axis=-1)
    scattered = (
        scattered.reshape(h2, w2, channels, 2, 2)
        .transpose(0, 3, 1, 4, 2)
        .reshape(2 * h2, 2 * w2, channels)
    )
    d_input = np.zeros(arg.input_shape, dtype=grad_out.dtype)
    d_input[: 2 * h2, : 2 * w2] = scattered
    return d_input


# -------------------------------------------------------------------
#  dense layers
# -------------------------------------------------------------------
def fully_connected(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    require_rank("fully connected weights", weights, 2)
    n, m = weights.shape
    if x.size != n:
        raise ShapeError(f"input length ({x.size}) != weight rows ({n})")
    if bias.shape != (m,):
        raise ShapeError(f"bias shape {tuple(bias.shape)} != ({m},)")
    return x.reshape(-1) @ weights + bias


def fully_connected_backward(
    grad_out: Tensor, x: Tensor, weights: Tensor
) -> tuple[Tensor, Tensor, Tensor]:
    """Return (d_x, d_weights, d_bias); d_x has the shape of ``x``."""
    if grad_out.shape != (weights.shape[1],):
        raise ShapeError(
            f"fully connected upstream gradient {tuple(grad_out.shape)} != "
            f"({weights.shape[1]},)"
        )
    flat = x.reshape(-1)
    d_weights = np.outer(flat, grad_out)
    d_x = (weights @ grad_out).reshape(x.shape)
    return d_x, d_weights, grad_out.copy()


def softmax(logits: Tensor) -> Tensor:
    """Class probabilities, always float64 whatever the logits' dtype.

    Scores near 0 or 1 keep their distance from the bound, which float32
    rounds away after a few saturated layers.
    """
    if logits.ndim != 1 or logits.size < 1:
        raise ShapeError(f"softmax expects a non-empty vector, got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NumericError("softmax input contains non-finite values")
    z = np.asarray(logits, dtype=np.float64)
    shifted = np.exp(z - z.max())
    return shifted / shifted.sum()


def softmax_backward(grad_out: Tensor, probabilities: Tensor) -> Tensor:
    p = np.asarray(probabilities, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    return p * (g - np.dot(g, p))


# -------------------------------------------------------------------
#  loss
# -------------------------------------------------------------------
def _check_loss_inputs(labels: Tensor, scores: Tensor) -> None:
    if labels.shape != scores.shape:
        raise ShapeError(
            f"labels {tuple(labels.shape)} and scores {tuple(scores.shape)} differ"
        )
    if np.any(scores < -LOG_EPS) or np.any(scores > 1 + LOG_EPS):
        raise ValueError("scores must be probabilities in [0, 1]")
    if not np.all(np.isfinite(scores)):
        raise NumericError("scores contain non-finite values")


def _clamp(scores: Tensor) -> np.ndarray:
    # 1 - LOG_EPS rounds to 1.0 in float32
    return np.clip(np.asarray(scores, dtype=np.float64), LOG_EPS, 1 - LOG_EPS)


def cross_entropy(labels: Tensor, scores: Tensor, form: LossForm = "binary_sum") -> float:
    """Cost of ``scores`` against one-hot ``labels``.

    ``binary_sum`` sums the binary cross-entropy over every component
    (``-sum l log s + (1 - l) log(1 - s)``); ``categorical`` keeps only the
    ``l log s`` terms. Log arguments are clamped to [1e-12, 1 - 1e-12] in
    double precision and a zero label weight contributes nothing (0 log 0 = 0).
    """
    _check_loss_inputs(labels, scores)
    clamped = _clamp(scores)
    labels = np.asarray(labels, dtype=np.float64)
    positive = np.where(labels != 0, labels * np.log(clamped), 0.0)
    if form == "categorical":
        return float(-positive.sum())
    if form != "binary_sum":
        raise ValueError(f"unknown loss form {form!r}")
    negative = np.where(labels != 1, (1 - labels) * np.log1p(-clamped), 0.0)
    return float(-(positive + negative).sum())


def cross_entropy_grad(labels: Tensor, scores: Tensor, form: LossForm = "binary_sum") -> Tensor:
    """dC/dscores for ``cross_entropy`` under the same clamping, in the scores' dtype."""
    _check_loss_inputs(labels, scores)
    clamped = _clamp(scores)
    labels = np.asarray(labels, dtype=np.float64)
    grad = -labels / clamped
    if form == "binary_sum":
        grad = grad + (1 - labels) / (1 - clamped)
    elif form != "categorical":
        raise ValueError(f"unknown loss form {form!r}")
    return grad.astype(scores.dtype, copy=False)


def softmax_cross_entropy_grad(
    labels: Tensor, probabilities: Tensor, form: LossForm = "binary_sum"
) -> Tensor:
    """dC/dlogits for ``cross_entropy(labels, softmax(logits))``, in float64.

    Nothing is divided by a score: ``1 - s_k`` is taken as the sum of the other
    probabilities, so every term is bounded by the label weights even when a
    score has saturated. This is the gradient of the unclamped loss; it agrees
    with ``softmax_backward(cross_entropy_grad(...))`` wherever the clamp is idle.
    """
    _check_loss_inputs(labels, probabilities)
    l = np.asarray(labels, dtype=np.float64)
    s = np.asarray(probabilities, dtype=np.float64)
    grad = s * l.sum() - l
    if form == "categorical":
        return grad
    if form != "binary_sum":
        raise ValueError(f"unknown loss form {form!r}")
    off_diagonal = 1.0 - np.eye(s.size)
    rest = off_diagonal @ s
    # ratio[j, k] = s_j / (1 - s_k) for j != k, never above 1
    ratio = np.divide(
        s[:, None] * off_diagonal,
        rest[None, :],
        out=np.zeros((s.size, s.size)),
        where=rest[None, :] > 0,
    )
    negatives = (1 - l) * s
    return grad + negatives - ratio @ negatives
