import logging
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from ..errors import ShapeError, UndefinedMetricError

logger = logging.getLogger(__name__)

METRICS = ("sensitivity", "specificity", "precision", "f_measure", "accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are the true class, columns the predicted class."""

    counts: np.ndarray

    @property
    def classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float | None:
        return _ratio(int(np.trace(self.counts)), self.total)

    def one_vs_rest(self, k: int) -> tuple[int, int, int, int]:
        """(Tpos, Fneg, Fpos, Tneg) for class ``k`` against the rest."""
        if not 0 <= k < self.classes:
            raise IndexError(f"class {k} outside 0..{self.classes - 1}")
        tpos = int(self.counts[k, k])
        fneg = int(self.counts[k].sum()) - tpos
        fpos = int(self.counts[:, k].sum()) - tpos
        tneg = self.total - tpos - fneg - fpos
        return tpos, fneg, fpos, tneg

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


def confusion_matrix(
    predicted: Sequence[int], actual: Sequence[int], classes: int = 5
) -> ConfusionMatrix:
    if len(predicted) != len(actual):
        raise ShapeError(
            f"predicted ({len(predicted)}) and actual ({len(actual)}) lengths differ"
        )
    counts = np.zeros((classes, classes), dtype=np.int64)
    if len(actual):
        pred = np.asarray(predicted, dtype=np.intp)
        true = np.asarray(actual, dtype=np.intp)
        if pred.min() < 0 or true.min() < 0 or pred.max() >= classes or true.max() >= classes:
            raise ValueError(f"grades must lie in 0..{classes - 1}")
        np.add.at(counts, (true, pred), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class scores; None marks an undefined (0/0) value."""

    sensitivity: float | None
    specificity: float | None
    precision: float | None
    f_measure: float | None
    accuracy: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def f_measure(precision: float | None, recall: float | None) -> float | None:
    """Harmonic mean of precision and recall; p = 1 with r = 0 gives 0."""
    if precision is None or recall is None:
        return None
    if precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def class_metrics(cm: ConfusionMatrix, k: int) -> ClassMetrics:
    tpos, fneg, fpos, tneg = cm.one_vs_rest(k)
    recall = _ratio(tpos, tpos + fneg)
    precision = _ratio(tpos, tpos + fpos)
    return ClassMetrics(
        sensitivity=recall,
        specificity=_ratio(tneg, tneg + fpos),
        precision=precision,
        f_measure=f_measure(precision, recall),
        accuracy=_ratio(tpos + tneg, cm.total),
    )


def per_class_metrics(cm: ConfusionMatrix) -> list[ClassMetrics]:
    return [class_metrics(cm, k) for k in range(cm.classes)]


def mean_defined(values: Sequence[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def macro_average(per_class: Sequence[ClassMetrics]) -> dict[str, float | None]:
    """Unweighted mean of each metric over the classes where it is defined."""
    if not per_class:
        raise ValueError("macro average needs at least one class")
    macro: dict[str, float | None] = {}
    for metric in METRICS:
        values = [getattr(m, metric) for m in per_class]
        excluded = values.count(None)
        if excluded:
            logger.warning("%s: %d undefined class value(s) excluded", metric, excluded)
        macro[metric] = mean_defined(values)
    if all(v is None for v in macro.values()):
        raise UndefinedMetricError("every per-class metric is undefined")
    return macro


def relative_improvement(ours: float, baseline: float) -> float:
    """100 * (ours / baseline - 1), in percent."""
    if baseline <= 0:
        raise UndefinedMetricError(f"baseline must be > 0, got {baseline}")
    return 100.0 * (ours / baseline - 1.0)
