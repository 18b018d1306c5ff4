from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np

from ..errors import ShapeError, StaleTapeError
from . import ops
from .tensor import ConvGeometry, Tensor

LayerKind = Literal["conv", "relu", "maxpool", "flatten", "fc", "softmax"]


@dataclass(frozen=True)
class TapeEntry:
    """Forward intermediates of one layer, cached for the backward pass."""

    index: int
    kind: LayerKind
    input: Tensor
    output_shape: tuple[int, ...]
    weights: Tensor | None = None
    bias: Tensor | None = None
    geometry: ConvGeometry | None = None
    # ArgIndices for maxpool, the probability vector for softmax
    aux: Any = None
    weight_shape: tuple[int, ...] | None = None


@dataclass
class Tape:
    entries: list[TapeEntry] = field(default_factory=list)

    def record(self, entry: TapeEntry) -> None:
        if self.entries and self.entries[-1].output_shape != tuple(entry.input.shape):
            raise StaleTapeError(
                f"layer {entry.index} input {tuple(entry.input.shape)} does not "
                f"follow layer {self.entries[-1].index} output "
                f"{self.entries[-1].output_shape}"
            )
        self.entries.append(entry)

    @property
    def output_shape(self) -> tuple[int, ...]:
        if not self.entries:
            raise StaleTapeError("tape is empty; run a forward pass first")
        return self.entries[-1].output_shape

    def __len__(self):
        return len(self.entries)

    def before_softmax(self) -> "Tape":
        """The tape up to the logits, for losses differentiated w.r.t. them."""
        if not self.entries or self.entries[-1].kind != "softmax":
            raise StaleTapeError("tape does not end in a softmax layer")
        return Tape(self.entries[:-1])


@dataclass(frozen=True)
class TapeGradients:
    """dLoss/dParam per parameterised layer index, plus dLoss/dInput."""

    params: dict[int, tuple[Tensor, Tensor]]
    input: Tensor


def _check_fresh(entry: TapeEntry) -> None:
    if entry.weights is None:
        return
    if entry.weight_shape is not None and tuple(entry.weights.shape) != entry.weight_shape:
        raise StaleTapeError(
            f"layer {entry.index} weights changed shape since forward: "
            f"{entry.weight_shape} -> {tuple(entry.weights.shape)}"
        )


def backward(tape: Tape, upstream_grad: Tensor) -> TapeGradients:
    """Reverse-mode chain rule over a recorded forward pass.

    ``upstream_grad`` is dLoss/dOutput of the last recorded layer.
    """
    if tuple(upstream_grad.shape) != tape.output_shape:
        raise StaleTapeError(
            f"upstream gradient {tuple(upstream_grad.shape)} != tape output "
            f"{tape.output_shape}"
        )
    grad = upstream_grad
    params: dict[int, tuple[Tensor, Tensor]] = {}
    for entry in reversed(tape.entries):
        _check_fresh(entry)
        match entry.kind:
            case "conv":
                grad, d_w, d_b = ops.conv2d_backward(
                    grad, entry.input, entry.weights, entry.geometry
                )
                params[entry.index] = (d_w, d_b)
            case "fc":
                grad, d_w, d_b = ops.fully_connected_backward(
                    grad, entry.input, entry.weights
                )
                params[entry.index] = (d_w, d_b)
            case "relu":
                grad = ops.relu_backward(grad, entry.input)
            case "maxpool":
                grad = ops.maxpool2_backward(grad, entry.aux)
            case "flatten":
                grad = grad.reshape(entry.input.shape)
            case "softmax":
                grad = ops.softmax_backward(grad, entry.aux).astype(entry.input.dtype, copy=False)
            case _:
                raise ShapeError(f"unknown layer kind {entry.kind!r} on tape")
        if grad.shape != entry.input.shape:
            raise StaleTapeError(
                f"layer {entry.index} produced gradient {tuple(grad.shape)} for "
                f"input {tuple(entry.input.shape)}"
            )
    return TapeGradients(params=dict(sorted(params.items())), input=np.asarray(grad))
