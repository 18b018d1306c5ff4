"""Comparison reports across models.

A report is a JSON document plus a fixed-width text table. The text is always
derived from the document, so re-rendering a saved document reproduces both
byte for byte.
"""

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, Sequence

from ..errors import ReportError, UndefinedMetricError
from .confusion import ConfusionMatrix, mean_defined, per_class_metrics, relative_improvement
from .grading import GRADE_LABELS

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
REPORT_METRICS = ("sensitivity", "specificity", "f_measure")
COLUMN_ORDER = ("VGG16", "VGG19", "RESNET18", "RESNET34", "RESNET50", "EDLM")
REFERENCE_MODEL = "EDLM"

# Claimed improvements are quoted to two decimals; table entries to two
# decimals of a ratio, which moves a macro delta by up to about one point.
REPRODUCED_TOLERANCE = 0.15
ROUNDING_TOLERANCE = 1.0


@dataclass(frozen=True)
class ModelResult:
    name: str
    per_class: dict[str, list[float | None]]

    def macro(self) -> dict[str, float | None]:
        return {m: mean_defined(self.per_class.get(m, [])) for m in REPORT_METRICS}

    @classmethod
    def from_confusion(cls, name: str, cm: ConfusionMatrix) -> "ModelResult":
        rows = per_class_metrics(cm)
        return cls(name, {m: [getattr(r, m) for r in rows] for m in REPORT_METRICS})


@dataclass(frozen=True)
class Report:
    document: dict[str, Any]
    text: str

    def to_json(self) -> str:
        return json.dumps(self.document, indent=2) + "\n"


@dataclass(frozen=True)
class PublishedTable:
    results: list[ModelResult]
    classes: tuple[str, ...]
    reference: str
    claimed: dict[str, dict[str, float]] = field(default_factory=dict)


def load_published() -> PublishedTable:
    """The published per-class comparison table and its claimed macro deltas."""
    raw = json.loads(
        resources.files("fundusnet.metrics").joinpath("data/published_comparison.json").read_text("utf-8")
    )
    results = [ModelResult(name, raw["per_class"][name]) for name in raw["models"]]
    return PublishedTable(
        results=results,
        classes=tuple(raw["classes"]),
        reference=raw["reference"],
        claimed=raw.get("claimed_improvements", {}),
    )


def _column_order(results: Sequence[ModelResult]) -> list[ModelResult]:
    by_name = {r.name: r for r in results}
    if len(by_name) != len(results):
        raise ValueError("model names in a report must be unique")
    known = [by_name[n] for n in COLUMN_ORDER if n in by_name]
    return known + [r for r in results if r.name not in COLUMN_ORDER]


def _claim_status(gap: float) -> str:
    if abs(gap) <= REPRODUCED_TOLERANCE:
        return "reproduced"
    if abs(gap) <= ROUNDING_TOLERANCE:
        return "consistent within table rounding"
    return "inconsistent"


def _improvement(ours: float | None, baseline: float | None) -> float | None:
    if ours is None or baseline is None:
        return None
    try:
        return relative_improvement(ours, baseline)
    except UndefinedMetricError:
        return None


def render_report(
    results: Sequence[ModelResult],
    reference: str | None = None,
    classes: Sequence[str] = GRADE_LABELS,
    claimed: Mapping[str, Mapping[str, float]] | None = None,
) -> Report:
    if not results:
        raise ValueError("a report needs at least one model")
    ordered = _column_order(results)
    names = [r.name for r in ordered]
    if reference is None:
        reference = REFERENCE_MODEL if REFERENCE_MODEL in names else names[-1]
    elif reference not in names:
        raise ValueError(f"reference model {reference!r} is not among {names}")
    for r in ordered:
        for metric in REPORT_METRICS:
            got = len(r.per_class.get(metric, []))
            if got != len(classes):
                raise ValueError(
                    f"{r.name}: {metric} has {got} class values, expected {len(classes)}"
                )

    macros = {r.name: r.macro() for r in ordered}
    improvements: dict[str, dict[str, float | None]] = {}
    claims: list[dict[str, Any]] = []
    for metric in REPORT_METRICS:
        improvements[metric] = {}
        for name in names:
            if name == reference:
                continue
            value = _improvement(macros[reference][metric], macros[name][metric])
            improvements[metric][name] = value
            quoted = (claimed or {}).get(metric, {}).get(name)
            if quoted is None or value is None:
                continue
            gap = value - quoted
            claims.append(
                {
                    "metric": metric,
                    "baseline": name,
                    "computed": value,
                    "claimed": quoted,
                    "gap": gap,
                    "status": _claim_status(gap),
                }
            )

    document = {
        "version": REPORT_VERSION,
        "classes": list(classes),
        "metrics": list(REPORT_METRICS),
        "reference": reference,
        "models": [
            {
                "name": r.name,
                "per_class": {m: list(r.per_class[m]) for m in REPORT_METRICS},
                "macro": macros[r.name],
            }
            for r in ordered
        ],
        "improvements": improvements,
        "claims": claims,
    }
    inconsistent = [c for c in claims if c["status"] == "inconsistent"]
    if inconsistent:
        logger.warning("%d claimed improvement(s) not reproduced from the table", len(inconsistent))
    return Report(document, _render_text(document))


def rerender(document: Mapping[str, Any]) -> Report:
    """Rebuild a report from its own JSON document."""
    try:
        if document["version"] != REPORT_VERSION:
            raise ReportError(f"unsupported report version {document['version']}")
        results = [ModelResult(m["name"], m["per_class"]) for m in document["models"]]
        claimed: dict[str, dict[str, float]] = {}
        for c in document["claims"]:
            claimed.setdefault(c["metric"], {})[c["baseline"]] = c["claimed"]
        return render_report(results, document["reference"], document["classes"], claimed)
    except (KeyError, TypeError) as e:
        raise ReportError(f"malformed report document: {e}") from e


def _fmt(value: float | None, spec: str = ".4f") -> str:
    return "n/a" if value is None else format(value, spec)


def _render_text(doc: Mapping[str, Any]) -> str:
    names = [m["name"] for m in doc["models"]]
    label_w = max(len(c) for c in [*doc["classes"], "Macro"]) + 2
    metric_w = max(len(m) for m in doc["metrics"]) + 2
    col_w = max(10, *(len(n) + 2 for n in names))

    lines = ["".ljust(metric_w) + "".ljust(label_w) + "".join(n.rjust(col_w) for n in names)]
    for metric in doc["metrics"]:
        for k, cls in enumerate(doc["classes"]):
            cells = [_fmt(m["per_class"][metric][k]) for m in doc["models"]]
            lines.append(metric.ljust(metric_w) + cls.ljust(label_w) + "".join(c.rjust(col_w) for c in cells))
        cells = [_fmt(m["macro"][metric]) for m in doc["models"]]
        lines.append("".ljust(metric_w) + "Macro".ljust(label_w) + "".join(c.rjust(col_w) for c in cells))

    if len(names) > 1:
        lines.append("")
        lines.append(f"Macro improvement of {doc['reference']} (%)")
        baselines = [n for n in names if n != doc["reference"]]
        lines.append("".ljust(metric_w) + "".join(n.rjust(col_w) for n in baselines))
        for metric in doc["metrics"]:
            cells = [_fmt(doc["improvements"][metric][n], "+.2f") for n in baselines]
            lines.append(metric.ljust(metric_w) + "".join(c.rjust(col_w) for c in cells))

    if doc["claims"]:
        lines.append("")
        lines.append("Claimed improvements")
        for c in doc["claims"]:
            lines.append(
                f"{c['metric'].ljust(metric_w)}{c['baseline'].ljust(col_w)}"
                f"computed {c['computed']:+.2f}  claimed {c['claimed']:+.2f}  {c['status']}"
            )
    return "\n".join(lines) + "\n"
