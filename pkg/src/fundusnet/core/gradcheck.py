from dataclasses import dataclass
from typing import Callable

import numpy as np

from .tensor import Tensor

LossFn = Callable[[Tensor], float]


@dataclass(frozen=True)
class FiniteDifferences:
    central: Tensor
    forward: Tensor
    backward: Tensor

    def kinks(self, tolerance: float = 1e-5) -> np.ndarray:
        """Coordinates where the one-sided slopes disagree (ReLU/max crossings)."""
        scale = np.maximum(1.0, np.maximum(np.abs(self.forward), np.abs(self.backward)))
        return np.abs(self.forward - self.backward) > tolerance * scale


def finite_differences(loss_fn: LossFn, params: Tensor, eps: float = 1e-5) -> FiniteDifferences:
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    base = np.array(params, copy=True)
    f0 = float(loss_fn(base.copy()))
    central = np.zeros(base.shape, dtype=np.float64)
    forward = np.zeros_like(central)
    backward = np.zeros_like(central)
    flat = base.reshape(-1)
    for i in range(flat.size):
        shifted = base.copy()
        shifted.reshape(-1)[i] = flat[i] + eps
        f_plus = float(loss_fn(shifted))
        shifted.reshape(-1)[i] = flat[i] - eps
        f_minus = float(loss_fn(shifted))
        central.reshape(-1)[i] = (f_plus - f_minus) / (2 * eps)
        forward.reshape(-1)[i] = (f_plus - f0) / eps
        backward.reshape(-1)[i] = (f0 - f_minus) / eps
    return FiniteDifferences(central, forward, backward)


def finite_diff_grad(loss_fn: LossFn, params: Tensor, eps: float = 1e-5) -> Tensor:
    """g[i] = (loss(p + eps e_i) - loss(p - eps e_i)) / (2 eps)."""
    return finite_differences(loss_fn, params, eps).central


def relative_error(
    analytic: Tensor,
    numeric: Tensor,
    mask: np.ndarray | None = None,
    floor: float = 1e-12,
) -> float:
    """max_i |a_i - n_i| / max(|a_i| + |n_i|, floor) over the unmasked coordinates.

    ``floor`` turns the ratio into an absolute error for coordinates where both
    values vanish. An empty selection scores 0.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise ValueError(f"cannot compare {a.size} values with {n.size}")
    if mask is not None:
        keep = ~np.asarray(mask).reshape(-1)
        a, n = a[keep], n[keep]
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.abs(a) + np.abs(n), floor)
    return float(np.max(np.abs(a - n) / denom))
