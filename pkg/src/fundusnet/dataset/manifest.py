import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from ..errors import ManifestError
from ..metrics.grading import DRGrade, grade_from_lesions

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ("image_path", "grade", "ma_count", "neovasc")
REQUIRED_COLUMNS = MANIFEST_COLUMNS[:2]
# Data rows start on line 2, after the header.
FIRST_DATA_LINE = 2


@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    grade: DRGrade
    ma_count: int | None = None
    neovascularisation: bool | None = None
    # physical line in the manifest it was read from
    line: int | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "grade", DRGrade(self.grade))
        if self.ma_count is not None and self.ma_count < 0:
            raise ValueError(f"ma_count must be >= 0, got {self.ma_count}")

    def resolve(self, base: str | os.PathLike) -> Path:
        path = Path(self.image_path)
        return path if path.is_absolute() else Path(base) / path


@dataclass(frozen=True)
class ClassDistribution:
    counts: dict[DRGrade, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, grade: int) -> int:
        return self.counts[DRGrade(grade)]

    def to_dict(self) -> dict[int, int]:
        return {int(g): n for g, n in self.counts.items()}


def _parse_int(value: str, column: str, path: Path, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ManifestError(f"{column} {value!r} is not an integer", path, line) from None


def _parse_flag(value: str, path: Path, line: int) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ManifestError(f"neovasc {value!r} is not a flag", path, line)


def _parse_row(row: pd.Series, path: Path, line: int) -> ManifestRecord:
    image_path = row["image_path"].strip()
    if not image_path:
        raise ManifestError("image_path is empty", path, line)
    grade = _parse_int(row["grade"], "grade", path, line)
    if grade not in DRGrade._value2member_map_:
        raise ManifestError(f"grade {grade} outside 0..4", path, line)
    ma_raw = row.get("ma_count", "").strip()
    ma_count = _parse_int(ma_raw, "ma_count", path, line) if ma_raw else None
    if ma_count is not None and ma_count < 0:
        raise ManifestError(f"ma_count {ma_count} is negative", path, line)
    neo_raw = row.get("neovasc", "").strip()
    neovasc = _parse_flag(neo_raw, path, line) if neo_raw else None
    return ManifestRecord(image_path, DRGrade(grade), ma_count, neovasc, line)


def load_manifest(path: str | os.PathLike) -> list[ManifestRecord]:
    """Read a manifest CSV with header ``image_path,grade[,ma_count,neovasc]``."""
    path = Path(path)
    if not path.is_file():
        raise ManifestError("manifest not found", path)
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            index_col=False,
            skip_blank_lines=False,
        ).fillna("")
    except pd.errors.EmptyDataError:
        raise ManifestError("manifest is empty, expected a header", path, 1) from None
    except pd.errors.ParserError as e:
        raise ManifestError(f"unparseable CSV: {e}", path) from e

    header = [str(c).strip() for c in frame.columns]
    if tuple(header) not in (REQUIRED_COLUMNS, MANIFEST_COLUMNS):
        raise ManifestError(
            f"bad header {','.join(header)!r}, expected {','.join(MANIFEST_COLUMNS)!r}",
            path,
            1,
        )
    frame.columns = header
    # blank rows are kept so the row index tracks the physical line
    records = [
        _parse_row(row, path, FIRST_DATA_LINE + i)
        for i, (_, row) in enumerate(frame.iterrows())
        if any(str(v).strip() for v in row)
    ]
    logger.debug("loaded %d records from %s", len(records), path)
    return records


def write_manifest(path: str | os.PathLike, records: Iterable[ManifestRecord]) -> Path:
    path = Path(path)
    rows = [
        {
            "image_path": r.image_path,
            "grade": int(r.grade),
            "ma_count": "" if r.ma_count is None else r.ma_count,
            "neovasc": "" if r.neovascularisation is None else int(r.neovascularisation),
        }
        for r in records
    ]
    pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS)).to_csv(path, index=False)
    return path


def validate_records(records: Sequence[ManifestRecord]) -> list[int]:
    """Indices of records whose lesion fields disagree with their grade.

    Only records carrying both ``ma_count`` and ``neovascularisation`` are checked.
    """
    bad = []
    for i, r in enumerate(records):
        if r.ma_count is None or r.neovascularisation is None:
            continue
        if grade_from_lesions(r.ma_count, r.neovascularisation) != r.grade:
            bad.append(i)
    if bad:
        logger.warning("%d record(s) disagree with the lesion grading rule", len(bad))
    return bad


def class_distribution(records: Iterable[ManifestRecord]) -> ClassDistribution:
    counts = {g: 0 for g in DRGrade}
    for r in records:
        counts[r.grade] += 1
    return ClassDistribution(counts)


def stratified_count(count: int, fraction: float) -> int:
    """round(count * fraction), halves rounded up."""
    return math.floor(count * fraction + 0.5)


def stratified_indices(
    grades: Sequence[int], test_fraction: float, seed: int
) -> tuple[list[int], list[int]]:
    """Per-class shuffled (train, test) index split; both lists ascending."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    labels = np.asarray(grades, dtype=np.intp)
    test = np.zeros(len(labels), dtype=bool)
    for grade in np.unique(labels):
        members = np.flatnonzero(labels == grade)
        take = stratified_count(len(members), test_fraction)
        test[members[rng.permutation(len(members))[:take]]] = True
    return np.flatnonzero(~test).tolist(), np.flatnonzero(test).tolist()


def stratified_split(
    records: Sequence[ManifestRecord], test_fraction: float, seed: int
) -> tuple[list[ManifestRecord], list[ManifestRecord]]:
    train_idx, test_idx = stratified_indices([r.grade for r in records], test_fraction, seed)
    return [records[i] for i in train_idx], [records[i] for i in test_idx]
