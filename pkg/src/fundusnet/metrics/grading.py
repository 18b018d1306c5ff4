from enum import IntEnum

MILD_MAX_MA = 5
MODERATE_MAX_MA = 15


class DRGrade(IntEnum):
    NO_DR = 0
    MILD_NPDR = 1
    MODERATE_NPDR = 2
    SEVERE_NPDR = 3
    PROLIFERATIVE_DR = 4

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def findings(self) -> str:
        """Clinical retinal findings that characterise the grade."""
        return _FINDINGS[self]


_LABELS = {
    DRGrade.NO_DR: "No DR",
    DRGrade.MILD_NPDR: "Mild NPDR",
    DRGrade.MODERATE_NPDR: "Moderate NPDR",
    DRGrade.SEVERE_NPDR: "Severe NPDR",
    DRGrade.PROLIFERATIVE_DR: "Proliferative DR",
}

_FINDINGS = {
    DRGrade.NO_DR: "no abnormalities",
    DRGrade.MILD_NPDR: "microaneurysms only",
    DRGrade.MODERATE_NPDR: "hard exudates, haemorrhages, microaneurysms",
    DRGrade.SEVERE_NPDR: "20 haemorrhages in each of four quadrants, venous beading in two",
    DRGrade.PROLIFERATIVE_DR: "neovascularisation, vitreous haemorrhage",
}

GRADE_LABELS = tuple(_LABELS[g] for g in DRGrade)


def grade_from_lesions(ma_count: int, neovascularisation: bool = False) -> DRGrade:
    """Grade from the microaneurysm count; neovascularisation overrides to proliferative.

    Count bands: 0 normal, 1-5 mild, 6-15 moderate, above 15 severe.
    """
    if ma_count < 0:
        raise ValueError(f"microaneurysm count must be >= 0, got {ma_count}")
    if neovascularisation:
        return DRGrade.PROLIFERATIVE_DR
    if ma_count == 0:
        return DRGrade.NO_DR
    if ma_count <= MILD_MAX_MA:
        return DRGrade.MILD_NPDR
    if ma_count <= MODERATE_MAX_MA:
        return DRGrade.MODERATE_NPDR
    return DRGrade.SEVERE_NPDR
