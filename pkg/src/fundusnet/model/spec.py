from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, ClassVar

from ..core.tensor import ConvGeometry
from ..errors import (
    ConfigError,
    ExtentUnderflowError,
    GeometryError,
    InputTooSmallError,
    ShapeError,
)

Shape = tuple[int, ...]


# Declarative layer list entries; each variant knows its own shape arithmetic and
# serialises to a plain dict tagged with name().
class LayerSpec(ABC):
    registry: ClassVar[dict[str, type["LayerSpec"]]] = {}

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        LayerSpec.registry[cls.name()] = cls

    @staticmethod
    @abstractmethod
    def name() -> str: ...

    @abstractmethod
    def output_shape(self, shape: Shape) -> Shape: ...

    def param_shapes(self, shape: Shape) -> tuple[Shape, Shape] | None:
        """(weight, bias) shapes for parameterised layers, None otherwise."""
        return None

    def to_dict(self) -> dict[str, Any]:
        data = {"type": self.name()}
        data.update({k: v for k, v in vars(self).items()})
        return data

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "LayerSpec":
        values = dict(data)
        kind = values.pop("type", None)
        if kind not in LayerSpec.registry:
            raise ConfigError(f"unknown layer type {kind!r}")
        return LayerSpec.registry[kind](**values)


@dataclass(frozen=True)
class Conv(LayerSpec):
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1

    def __post_init__(self):
        if self.out_channels < 1:
            raise ConfigError(f"conv out_channels must be >= 1, got {self.out_channels}")
        ConvGeometry(self.kernel, self.kernel, self.stride, self.padding)

    @staticmethod
    def name():
        return "conv"

    @property
    def geometry(self) -> ConvGeometry:
        return ConvGeometry(self.kernel, self.kernel, self.stride, self.padding)

    def output_shape(self, shape):
        if len(shape) != 3:
            raise ShapeError(f"conv expects an H x W x C input, got {shape}")
        out_h, out_w = self.geometry.output_extent(shape[0], shape[1])
        return (out_h, out_w, self.out_channels)

    def param_shapes(self, shape):
        return ((self.kernel, self.kernel, shape[2], self.out_channels), (self.out_channels,))


@dataclass(frozen=True)
class ReLU(LayerSpec):
    @staticmethod
    def name():
        return "relu"

    def output_shape(self, shape):
        return shape


@dataclass(frozen=True)
class MaxPool2(LayerSpec):
    @staticmethod
    def name():
        return "maxpool2"

    def output_shape(self, shape):
        if len(shape) != 3:
            raise ShapeError(f"maxpool expects an H x W x C input, got {shape}")
        if shape[0] < 2 or shape[1] < 2:
            raise GeometryError(f"2x2 pooling of a {shape[0]}x{shape[1]} map")
        return (shape[0] // 2, shape[1] // 2, shape[2])


@dataclass(frozen=True)
class Flatten(LayerSpec):
    @staticmethod
    def name():
        return "flatten"

    def output_shape(self, shape):
        size = 1
        for extent in shape:
            size *= extent
        return (size,)


@dataclass(frozen=True)
class FullyConnected(LayerSpec):
    out_features: int

    def __post_init__(self):
        if self.out_features < 1:
            raise ConfigError(f"out_features must be >= 1, got {self.out_features}")

    @staticmethod
    def name():
        return "fc"

    def output_shape(self, shape):
        if len(shape) != 1:
            raise ShapeError(f"fully connected layer expects a flat input, got {shape}")
        return (self.out_features,)

    def param_shapes(self, shape):
        return ((shape[0], self.out_features), (self.out_features,))


@dataclass(frozen=True)
class Softmax(LayerSpec):
    @staticmethod
    def name():
        return "softmax"

    def output_shape(self, shape):
        if len(shape) != 1:
            raise ShapeError(f"softmax expects a flat input, got {shape}")
        return shape


@dataclass(frozen=True)
class NetworkSpec:
    input_shape: Shape
    layers: tuple[LayerSpec, ...]
    num_classes: int
    shapes: tuple[Shape, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(e) for e in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        for i, layer in enumerate(self.layers[:-1]):
            if isinstance(layer, Softmax):
                raise ConfigError(f"softmax may only be the final layer (found at {i})")
        shapes = _infer(self.input_shape, self.layers)
        if shapes and shapes[-1] != (self.num_classes,):
            raise ShapeError(
                f"network output {shapes[-1]} != ({self.num_classes},) classes"
            )
        object.__setattr__(self, "shapes", tuple(shapes))

    def input_shape_of(self, index: int) -> Shape:
        return self.input_shape if index == 0 else self.shapes[index - 1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NetworkSpec":
        return cls(
            input_shape=tuple(data["input_shape"]),
            layers=tuple(LayerSpec.from_dict(layer) for layer in data["layers"]),
            num_classes=int(data["num_classes"]),
        )


def _infer(input_shape: Shape, layers) -> list[Shape]:
    shapes = []
    shape = tuple(input_shape)
    for index, layer in enumerate(layers):
        try:
            shape = layer.output_shape(shape)
        except (GeometryError, ShapeError) as e:
            raise ExtentUnderflowError(index, f"{layer.name()}: {e}") from e
        shapes.append(shape)
    return shapes


def infer_shapes(spec: NetworkSpec) -> list[Shape]:
    """Output shape of every layer, in order."""
    return _infer(spec.input_shape, spec.layers)


# -------------------------------------------------------------------
#  stock architectures
# -------------------------------------------------------------------
# (channels, convs) per VGG-style block
VGG_BLOCKS = ((64, 2), (128, 2), (256, 3), (512, 3), (512, 3))
COMPACT_FILTERS = 32
MIN_INPUT_EXTENT = 32


def _check_input(input_shape: Shape) -> Shape:
    shape = tuple(int(e) for e in input_shape)
    if len(shape) != 3:
        raise ShapeError(f"input shape must be (H, W, C), got {input_shape}")
    if shape[0] < MIN_INPUT_EXTENT or shape[1] < MIN_INPUT_EXTENT:
        raise InputTooSmallError(
            f"input {shape[0]}x{shape[1]} is below {MIN_INPUT_EXTENT}x{MIN_INPUT_EXTENT}; "
            "five 2x2 pools would underflow"
        )
    return shape


def edlm_default_spec(input_shape: Shape = (224, 224, 3), num_classes: int = 5) -> NetworkSpec:
    """Thirteen 3x3 convolutions in five pooled blocks, FC(4096), FC(classes), softmax."""
    shape = _check_input(input_shape)
    layers: list[LayerSpec] = []
    for channels, convs in VGG_BLOCKS:
        for _ in range(convs):
            layers += [Conv(channels, kernel=3, stride=1, padding=1), ReLU()]
        layers.append(MaxPool2())
    layers += [Flatten(), FullyConnected(4096), ReLU(), FullyConnected(num_classes), Softmax()]
    return NetworkSpec(shape, tuple(layers), num_classes)


def edlm_compact_spec(input_shape: Shape = (64, 64, 3), num_classes: int = 5) -> NetworkSpec:
    """Five blocks of Conv(32 filters) + ReLU + 2x2 pool, then FC(classes) and softmax."""
    shape = _check_input(input_shape)
    layers: list[LayerSpec] = []
    for _ in range(5):
        layers += [Conv(COMPACT_FILTERS, kernel=3, stride=1, padding=1), ReLU(), MaxPool2()]
    layers += [Flatten(), FullyConnected(num_classes), Softmax()]
    return NetworkSpec(shape, tuple(layers), num_classes)


ARCHITECTURES = {"vgg": edlm_default_spec, "compact": edlm_compact_spec}
# spellings accepted from the command line and config files
ARCH_ALIASES = {"table3": "vgg"}


def count_parameters(spec: NetworkSpec) -> int:
    total = 0
    for index, layer in enumerate(spec.layers):
        shapes = layer.param_shapes(spec.input_shape_of(index))
        if shapes is None:
            continue
        for shape in shapes:
            size = 1
            for extent in shape:
                size *= extent
            total += size
    return total


def summarize(spec: NetworkSpec) -> list[dict[str, Any]]:
    """Rows with the architecture table's columns, ReLUs omitted."""
    rows = []
    block = 1
    for index, layer in enumerate(spec.layers):
        shape = spec.shapes[index]
        if isinstance(layer, Conv):
            rows.append(
                {
                    "name": f"Conv{block}",
                    "layer": "Conv",
                    "feature_map": "x".join(map(str, shape)),
                    "kernel": f"{layer.kernel}x{layer.kernel}x{layer.out_channels}",
                    "stride": f"{layer.stride}x{layer.stride}",
                    "padding": f"{layer.padding}x{layer.padding}",
                }
            )
        elif isinstance(layer, MaxPool2):
            rows.append(
                {
                    "name": f"Conv{block}",
                    "layer": "Maxpool",
                    "feature_map": "x".join(map(str, shape)),
                    "kernel": "2x2",
                    "stride": "2x2",
                    "padding": "0x0",
                }
            )
            block += 1
        elif isinstance(layer, FullyConnected):
            rows.append(
                {
                    "name": "Fully connected",
                    "layer": "FC",
                    "feature_map": str(shape[0]),
                    "kernel": f"1x1x{layer.out_features}",
                    "stride": "",
                    "padding": "",
                }
            )
    return rows
