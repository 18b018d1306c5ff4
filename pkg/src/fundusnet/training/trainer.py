"""Per-sample / mini-batch SGD training and grid hyper-parameter search."""

import json
import logging
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numpy as np

from ..core import ops
from ..core.tape import backward
from ..core.tensor import resolve_dtype
from ..dataset.manifest import stratified_indices
from ..errors import EmptyConfigError, NonFiniteError, NumericError, ShapeError
from ..metrics.confusion import confusion_matrix, macro_average, per_class_metrics
from ..model.network import (
    LayerParams,
    Parameters,
    forward,
    image_to_input,
    init_parameters,
    predict,
)
from ..model.spec import NetworkSpec
from .config import TrainConfig
from .sgd import sgd_step, shuffle_epoch, update_sample_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Samples:
    """Network-ready inputs (N x H x W x C) with integer class labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise ShapeError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: Sequence[int]) -> "Samples":
        idx = np.asarray(indices, dtype=np.intp)
        return Samples(self.inputs[idx], self.labels[idx])

    @classmethod
    def from_images(cls, images, labels, precision="single") -> "Samples":
        dtype = resolve_dtype(precision)
        if len(images) == 0:
            return cls(np.zeros((0, 0, 0, 0), dtype=dtype), np.zeros(0, dtype=np.int64))
        inputs = np.stack([image_to_input(img, precision) for img in images])
        return cls(inputs, np.asarray(labels, dtype=np.int64))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    seconds: float = field(default=0.0, compare=False)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.epochs]

    @property
    def accuracies(self) -> list[float]:
        return [e.accuracy for e in self.epochs]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.epochs)


def _one_hot(label: int, classes: int, dtype) -> np.ndarray:
    target = np.zeros(classes, dtype=dtype)
    target[label] = 1
    return target


def _epoch_order(
    labels: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    weights: np.ndarray,
) -> np.ndarray:
    n = len(labels)
    informative = cfg.sampling_mode == "informative"
    if cfg.balanced_batches:
        pools = {int(c): np.flatnonzero(labels == c) for c in np.unique(labels)}
        order: list[int] = []
        while len(order) < n:
            for c in rng.permutation(sorted(pools)):
                pool = pools[int(c)]
                p = weights[pool] / weights[pool].sum() if informative else None
                order.append(int(rng.choice(pool, p=p)))
        return np.asarray(order[:n], dtype=np.intp)
    if informative:
        return rng.choice(n, size=n, replace=True, p=weights)
    return shuffle_epoch(n, rng)


def _sample_step(spec, params, x, target, loss_form):
    probs, tape = forward(spec, params, x)
    loss = ops.cross_entropy(target, probs, loss_form)
    d_logits = ops.softmax_cross_entropy_grad(target, probs, loss_form)
    grads = backward(tape.before_softmax(), d_logits.astype(x.dtype))
    return loss, int(np.argmax(probs)), Parameters.from_gradients(grads)


def _accumulate(total: Parameters | None, grads: Parameters) -> Parameters:
    if total is None:
        return grads
    return Parameters(
        {i: LayerParams(p.weight + grads[i].weight, p.bias + grads[i].bias) for i, p in total}
    )


def train(
    dataset: Samples,
    spec: NetworkSpec,
    config: TrainConfig,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> tuple[Parameters, TrainHistory]:
    """Train from seeded initial parameters; identical inputs give identical results."""
    n = len(dataset)
    if n == 0:
        raise ShapeError("cannot train on an empty dataset")
    labels = np.asarray(dataset.labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ValueError(f"labels must lie in 0..{spec.num_classes - 1}")

    params = init_parameters(spec, config.seed, config.precision)
    history = TrainHistory()
    dtype = params.dtype
    inputs = dataset.inputs.astype(dtype, copy=False)
    rng = np.random.default_rng([config.seed, 1])
    sample_losses = np.ones(n)
    weights = update_sample_weights(sample_losses)

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = _epoch_order(labels, config, rng, weights)
        epoch_loss = 0.0
        correct = 0
        for batch, start in enumerate(range(0, n, config.batch_size), start=1):
            batch_idx = order[start : start + config.batch_size]
            total = None
            for i in batch_idx:
                target = _one_hot(labels[i], spec.num_classes, dtype)
                try:
                    loss, guess, grads = _sample_step(spec, params, inputs[i], target, config.loss_form)
                except NumericError as e:
                    raise NonFiniteError(f"training diverged: {e}", epoch, batch) from e
                if not math.isfinite(loss):
                    raise NonFiniteError("non-finite loss", epoch, batch)
                sample_losses[i] = loss
                epoch_loss += loss
                correct += guess == labels[i]
                total = _accumulate(total, grads)
            scale = dtype.type(1.0 / len(batch_idx))
            mean_grads = total.map(lambda _, t: t * scale)
            try:
                params = sgd_step(params, mean_grads, config.learning_rate, config.weight_decay)
            except NonFiniteError as e:
                raise NonFiniteError(str(e), epoch, batch) from e
        if config.sampling_mode == "informative":
            weights = update_sample_weights(sample_losses)
        stats = EpochStats(
            epoch=epoch,
            loss=epoch_loss / n,
            accuracy=correct / n,
            seconds=time.perf_counter() - started,
        )
        history.epochs.append(stats)
        logger.info(
            "epoch %d/%d loss %.6f accuracy %.4f (%.1fs)",
            epoch,
            config.epochs,
            stats.loss,
            stats.accuracy,
            stats.seconds,
        )
        if on_epoch is not None:
            on_epoch(stats)
    return params, history


def evaluate(spec: NetworkSpec, params: Parameters, dataset: Samples):
    """Confusion matrix of the network's arg-max predictions on ``dataset``."""
    inputs = dataset.inputs.astype(params.dtype, copy=False)
    _, predicted = predict(spec, params, inputs)
    return confusion_matrix(predicted.tolist(), dataset.labels.tolist(), spec.num_classes)


@dataclass(frozen=True)
class GridRow:
    index: int
    config: TrainConfig
    macro_f: float | None
    accuracy: float | None
    diverged: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "config": self.config.to_dict(),
            "macro_f": self.macro_f,
            "accuracy": self.accuracy,
            "diverged": self.diverged,
        }


def grid_search(
    configs: Sequence[TrainConfig],
    dataset: Samples,
    split_fraction: float,
    spec: NetworkSpec,
    seed: int = 0,
) -> tuple[TrainConfig, list[GridRow]]:
    """Train every config on one stratified split; keep the best validation macro F.

    Diverging configs score nothing. Ties go to the lower config index.
    """
    if not configs:
        raise EmptyConfigError("grid search needs at least one config")
    train_idx, val_idx = stratified_indices(dataset.labels, split_fraction, seed)
    train_set, val_set = dataset.subset(train_idx), dataset.subset(val_idx)

    rows: list[GridRow] = []
    best_index, best_score = 0, -math.inf
    for index, cfg in enumerate(configs):
        try:
            params, _ = train(train_set, spec, cfg)
            cm = evaluate(spec, params, val_set)
        except NumericError as e:
            logger.warning("config %d diverged: %s", index, e)
            rows.append(GridRow(index, cfg, None, None, diverged=True))
            continue
        macro = macro_average(per_class_metrics(cm)) if cm.total else {}
        macro_f = macro.get("f_measure")
        rows.append(GridRow(index, cfg, macro_f, cm.accuracy()))
        logger.info("config %d: validation macro F %s", index, macro_f)
        if macro_f is not None and macro_f > best_score:
            best_index, best_score = index, macro_f
    return configs[best_index], rows
