import numpy as np

from ..errors import NonFiniteError, ShapeError
from ..model.network import LayerParams, Parameters

SampleWeights = np.ndarray


def sgd_step(params: Parameters, grads: Parameters, lr: float, weight_decay: float) -> Parameters:
    """w <- w - lr * (g + weight_decay * w); biases take the plain gradient step."""
    if params.layers.keys() != grads.layers.keys():
        raise ShapeError(
            f"gradient layers {sorted(grads.layers)} != parameter layers {sorted(params.layers)}"
        )
    layers = {}
    for index, p in params:
        g = grads[index]
        for name, t, gt in (("weight", p.weight, g.weight), ("bias", p.bias, g.bias)):
            if t.shape != gt.shape:
                raise ShapeError(f"layer {index} {name}: gradient {gt.shape} != parameter {t.shape}")
            if not np.all(np.isfinite(gt)):
                raise NonFiniteError(f"layer {index} {name}: non-finite gradient")
        dtype = p.weight.dtype
        step = dtype.type(lr)
        decay = dtype.type(weight_decay)
        weight = p.weight - step * (g.weight.astype(dtype, copy=False) + decay * p.weight)
        bias = p.bias - step * g.bias.astype(dtype, copy=False)
        layers[index] = LayerParams(weight, bias)
    return Parameters(layers)


def shuffle_epoch(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform random permutation of 0..n-1 drawn from ``rng``."""
    if n < 1:
        raise ValueError(f"cannot shuffle {n} samples")
    return rng.permutation(n)


def update_sample_weights(losses) -> SampleWeights:
    """Loss-proportional sampling weights; all-zero losses give uniform weights."""
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ShapeError(f"expected a non-empty vector of losses, got shape {losses.shape}")
    if not np.all(np.isfinite(losses)):
        raise NonFiniteError("sample losses must be finite")
    if np.any(losses < 0):
        raise ValueError("sample losses must be >= 0")
    total = losses.sum()
    if total == 0:
        return np.full(losses.size, 1.0 / losses.size)
    return losses / total
