from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from ..core import ops
from ..core.tape import Tape, TapeEntry, TapeGradients
from ..core.tensor import Precision, Tensor, resolve_dtype
from ..errors import ShapeError
from .spec import Conv, Flatten, FullyConnected, MaxPool2, NetworkSpec, ReLU, Softmax

INIT_VARIANCE = 0.05


@dataclass(frozen=True)
class LayerParams:
    weight: Tensor
    bias: Tensor


@dataclass(frozen=True)
class Parameters:
    """Weights and biases of every Conv/FC layer, keyed by layer index.

    Gradients use the same type, so optimiser code can zip the two.
    """

    layers: dict[int, LayerParams] = field(default_factory=dict)

    def __iter__(self) -> Iterator[tuple[int, LayerParams]]:
        return iter(sorted(self.layers.items()))

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, index: int) -> LayerParams:
        return self.layers[index]

    @property
    def dtype(self) -> np.dtype:
        for _, p in self:
            return p.weight.dtype
        return np.dtype(np.float32)

    def tensors(self) -> Iterator[tuple[int, str, Tensor]]:
        for index, p in self:
            yield index, "weight", p.weight
            yield index, "bias", p.bias

    def map(self, fn: Callable[[str, Tensor], Tensor]) -> "Parameters":
        return Parameters(
            {
                index: LayerParams(fn("weight", p.weight), fn("bias", p.bias))
                for index, p in self
            }
        )

    def replace(self, index: int, weight: Tensor | None = None, bias: Tensor | None = None):
        current = self.layers[index]
        layers = dict(self.layers)
        layers[index] = LayerParams(
            current.weight if weight is None else weight,
            current.bias if bias is None else bias,
        )
        return Parameters(layers)

    def shapes(self) -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
        return {i: (p.weight.shape, p.bias.shape) for i, p in self}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for _, _, t in self.tensors())

    def bit_equal(self, other: "Parameters") -> bool:
        if self.layers.keys() != other.layers.keys():
            return False
        return all(
            a.weight.dtype == b.weight.dtype
            and np.array_equal(a.weight, b.weight)
            and np.array_equal(a.bias, b.bias)
            for (_, a), (_, b) in zip(self, other)
        )

    @classmethod
    def from_gradients(cls, grads: TapeGradients) -> "Parameters":
        return cls({i: LayerParams(w, b) for i, (w, b) in grads.params.items()})


def expected_shapes(spec: NetworkSpec) -> dict[int, tuple[tuple[int, ...], tuple[int, ...]]]:
    shapes = {}
    for index, layer in enumerate(spec.layers):
        param_shapes = layer.param_shapes(spec.input_shape_of(index))
        if param_shapes is not None:
            shapes[index] = param_shapes
    return shapes


def check_parameters(spec: NetworkSpec, params: Parameters) -> None:
    expected = expected_shapes(spec)
    actual = params.shapes()
    if expected.keys() != actual.keys():
        raise ShapeError(
            f"parameter layers {sorted(actual)} != parameterised layers {sorted(expected)}"
        )
    for index, shapes in expected.items():
        if tuple(actual[index][0]) != shapes[0] or tuple(actual[index][1]) != shapes[1]:
            raise ShapeError(
                f"layer {index}: parameter shapes {actual[index]} != expected {shapes}"
            )


def init_parameters(spec: NetworkSpec, seed: int, precision: Precision = "single") -> Parameters:
    """Draw every weight and bias i.i.d. from Normal(0, 0.05) with a seeded generator."""
    dtype = resolve_dtype(precision)
    rng = np.random.default_rng(seed)
    std = np.sqrt(INIT_VARIANCE)
    layers = {}
    for index, (w_shape, b_shape) in expected_shapes(spec).items():
        weight = rng.normal(0.0, std, size=w_shape).astype(dtype)
        bias = rng.normal(0.0, std, size=b_shape).astype(dtype)
        layers[index] = LayerParams(weight, bias)
    return Parameters(layers)


def zeros_like(params: Parameters) -> Parameters:
    return params.map(lambda _, t: np.zeros_like(t))


def image_to_input(img: np.ndarray, precision: Precision = "single") -> Tensor:
    """Scale 8-bit intensities to [0, 1]."""
    return (np.asarray(img, dtype=np.float64) / 255.0).astype(resolve_dtype(precision))


def forward(spec: NetworkSpec, params: Parameters, input: Tensor) -> tuple[Tensor, Tape]:
    """Run every layer in order; the tape caches what backward() needs."""
    if tuple(input.shape) != spec.input_shape:
        raise ShapeError(
            f"input shape {tuple(input.shape)} != network input {spec.input_shape}"
        )
    check_parameters(spec, params)
    tape = Tape()
    x = input
    for index, layer in enumerate(spec.layers):
        weights = bias = geometry = aux = None
        match layer:
            case Conv():
                p = params[index]
                weights, bias, geometry = p.weight, p.bias, layer.geometry
                out = ops.conv2d(x, weights, bias, geometry)
                kind = "conv"
            case ReLU():
                out = ops.relu(x)
                kind = "relu"
            case MaxPool2():
                out, aux = ops.maxpool2(x)
                kind = "maxpool"
            case Flatten():
                out = x.reshape(-1)
                kind = "flatten"
            case FullyConnected():
                p = params[index]
                weights, bias = p.weight, p.bias
                out = ops.fully_connected(x, weights, bias)
                kind = "fc"
            case Softmax():
                out = ops.softmax(x)
                aux = out
                kind = "softmax"
            case _:
                raise ShapeError(f"layer {index}: unsupported layer {layer!r}")
        tape.record(
            TapeEntry(
                index=index,
                kind=kind,
                input=x,
                output_shape=tuple(out.shape),
                weights=weights,
                bias=bias,
                geometry=geometry,
                aux=aux,
                weight_shape=None if weights is None else tuple(weights.shape),
            )
        )
        x = out
    return x, tape


def predict(spec: NetworkSpec, params: Parameters, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Class probabilities and arg-max labels for a sequence of inputs."""
    if len(inputs) == 0:
        return np.zeros((0, spec.num_classes)), np.zeros(0, dtype=np.intp)
    probs = np.stack([forward(spec, params, x)[0] for x in inputs])
    return probs, probs.argmax(axis=1)
