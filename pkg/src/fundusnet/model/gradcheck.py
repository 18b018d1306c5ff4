"""Analytic-vs-numeric gradient checks over random small networks."""

import logging
from dataclasses import dataclass, field

import numpy as np

from ..core import ops
from ..core.gradcheck import finite_differences, relative_error
from ..core.tape import backward
from ..errors import ExtentUnderflowError, GradCheckError
from .network import Parameters, forward, init_parameters
from .spec import (
    Conv,
    Flatten,
    FullyConnected,
    LayerSpec,
    MaxPool2,
    NetworkSpec,
    ReLU,
    Softmax,
    count_parameters,
)

logger = logging.getLogger(__name__)

MAX_PARAMETERS = 500
DEFAULT_TOLERANCE = 1e-4
# below this magnitude a coordinate is judged by its absolute error
GRADIENT_FLOOR = 1e-4


@dataclass
class NetworkCheck:
    spec: NetworkSpec
    errors: dict[str, float]
    kinks: int

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)


@dataclass
class GradCheckReport:
    checks: list[NetworkCheck] = field(default_factory=list)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def max_error(self) -> float:
        return max((c.max_error for c in self.checks), default=0.0)

    @property
    def kinks(self) -> int:
        return sum(c.kinks for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _conv(rng: np.random.Generator) -> Conv:
    return Conv(
        out_channels=int(rng.integers(1, 4)),
        kernel=int(rng.integers(2, 4)),
        stride=int(rng.integers(1, 3)),
        padding=int(rng.integers(0, 2)),
    )


def random_network(rng: np.random.Generator, max_parameters: int = MAX_PARAMETERS) -> NetworkSpec:
    """A network of at most three parameterised layers and ``max_parameters`` weights."""
    while True:
        classes = int(rng.integers(2, 5))
        shape = (int(rng.integers(4, 7)), int(rng.integers(4, 7)), int(rng.integers(1, 3)))
        variant = int(rng.integers(0, 3))
        layers: list[LayerSpec]
        if variant == 0:
            layers = [_conv(rng), ReLU(), MaxPool2(), Flatten()]
        elif variant == 1:
            layers = [_conv(rng), ReLU(), _conv(rng), ReLU(), Flatten()]
        else:
            layers = [Flatten(), FullyConnected(int(rng.integers(2, 7))), ReLU()]
        layers += [FullyConnected(classes), Softmax()]
        try:
            spec = NetworkSpec(shape, tuple(layers), classes)
        except ExtentUnderflowError:
            continue
        if count_parameters(spec) <= max_parameters:
            return spec


def check_network(
    spec: NetworkSpec,
    params: Parameters,
    x: np.ndarray,
    label: np.ndarray,
    eps: float = 1e-6,
    loss_form: ops.LossForm = "binary_sum",
) -> NetworkCheck:
    def loss(p: Parameters, inp: np.ndarray) -> float:
        probs, _ = forward(spec, p, inp)
        return ops.cross_entropy(label, probs, loss_form)

    probs, tape = forward(spec, params, x)
    grads = backward(tape, ops.cross_entropy_grad(label, probs, loss_form))

    errors: dict[str, float] = {}
    kinks = 0
    for index, name, tensor in params.tensors():
        analytic = grads.params[index][0 if name == "weight" else 1]
        fd = finite_differences(
            lambda t, index=index, name=name: loss(params.replace(index, **{name: t}), x),
            tensor,
            eps,
        )
        mask = fd.kinks()
        kinks += int(mask.sum())
        errors[f"{index}.{name}"] = relative_error(analytic, fd.central, mask, GRADIENT_FLOOR)

    fd = finite_differences(lambda t: loss(params, t), x, eps)
    mask = fd.kinks()
    kinks += int(mask.sum())
    errors["input"] = relative_error(grads.input, fd.central, mask, GRADIENT_FLOOR)
    return NetworkCheck(spec, errors, kinks)


def gradcheck_suite(
    n_networks: int = 100,
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    strict: bool = False,
) -> GradCheckReport:
    """Compare backward() with central differences on random double-precision networks."""
    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance=tolerance)
    for n in range(n_networks):
        spec = random_network(rng)
        params = init_parameters(spec, int(rng.integers(2**31)), precision="double")
        x = rng.uniform(0.0, 1.0, size=spec.input_shape)
        label = np.zeros(spec.num_classes)
        label[rng.integers(spec.num_classes)] = 1.0
        check = check_network(spec, params, x, label)
        logger.debug(
            "network %d: %d params, max rel error %.3e, %d kinks skipped",
            n,
            count_parameters(spec),
            check.max_error,
            check.kinks,
        )
        report.checks.append(check)
    logger.info(
        "gradient check over %d networks: max relative error %.3e (%d kink coordinates skipped)",
        n_networks,
        report.max_error,
        report.kinks,
    )
    if strict and not report.passed:
        raise GradCheckError(
            f"max relative gradient error {report.max_error:.3e} exceeds {tolerance:.1e}"
        )
    return report
