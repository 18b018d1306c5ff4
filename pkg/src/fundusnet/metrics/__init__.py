from .grading import DRGrade, GRADE_LABELS, grade_from_lesions
from .confusion import (
    ConfusionMatrix,
    ClassMetrics,
    confusion_matrix,
    class_metrics,
    per_class_metrics,
    f_measure,
    macro_average,
    relative_improvement,
)
from .report import (
    ModelResult,
    Report,
    PublishedTable,
    load_published,
    render_report,
    rerender,
)

__all__ = [
    "DRGrade",
    "GRADE_LABELS",
    "grade_from_lesions",
    "ConfusionMatrix",
    "ClassMetrics",
    "confusion_matrix",
    "class_metrics",
    "per_class_metrics",
    "f_measure",
    "macro_average",
    "relative_improvement",
    "ModelResult",
    "Report",
    "PublishedTable",
    "load_published",
    "render_report",
    "rerender",
]
