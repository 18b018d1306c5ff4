"""Synthetic fundus images with grade-dependent lesion motifs.

Every image is a textured orange disc on black. Lesions drawn on top:

* dark dots standing in for microaneurysms (count follows the grading bands),
* dark red blobs standing in for haemorrhages (severe and proliferative),
* bright branching filaments standing in for new vessels (proliferative only).
"""

import logging
from dataclasses import dataclass, asdict, fields

import numpy as np

from ..errors import ConfigError
from ..metrics.grading import DRGrade, MILD_MAX_MA, MODERATE_MAX_MA
from ..preprocess.filters import ImageU8, to_u8

logger = logging.getLogger(__name__)

MIN_IMAGE_SIZE = 32
SEVERE_MAX_MA = 25

BACKGROUND = np.array([170.0, 85.0, 40.0])
DOT_COLOUR = np.array([70.0, 25.0, 15.0])
BLOB_COLOUR = np.array([100.0, 15.0, 10.0])
FILAMENT_COLOUR = np.array([235.0, 190.0, 130.0])

# inclusive microaneurysm count range per grade
MA_RANGES = {
    DRGrade.NO_DR: (0, 0),
    DRGrade.MILD_NPDR: (1, MILD_MAX_MA),
    DRGrade.MODERATE_NPDR: (MILD_MAX_MA + 1, MODERATE_MAX_MA),
    DRGrade.SEVERE_NPDR: (MODERATE_MAX_MA + 1, SEVERE_MAX_MA),
    DRGrade.PROLIFERATIVE_DR: (MILD_MAX_MA + 1, SEVERE_MAX_MA),
}


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: int = 100
    image_size: int = 64
    seed: int = 7
    dot_radius: tuple[int, int] = (1, 2)
    blob_radius: tuple[int, int] = (3, 5)
    blob_count: tuple[int, int] = (1, 3)
    filament_length: tuple[int, int] = (8, 15)
    filament_count: tuple[int, int] = (2, 4)
    noise_sigma: float = 8.0

    def __post_init__(self):
        if self.n_per_class < 1:
            raise ConfigError(f"n_per_class must be >= 1, got {self.n_per_class}")
        if self.image_size < MIN_IMAGE_SIZE:
            raise ConfigError(f"image_size must be >= {MIN_IMAGE_SIZE}, got {self.image_size}")
        for name in ("dot_radius", "blob_radius", "blob_count", "filament_length", "filament_count"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} must be an increasing range >= 1, got {(lo, hi)}")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown synth settings: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


@dataclass(frozen=True)
class SyntheticDataset:
    images: list[ImageU8]
    grades: np.ndarray
    ma_counts: np.ndarray
    neovascularisation: np.ndarray

    def __len__(self) -> int:
        return len(self.images)


class _Canvas:
    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
        self.yy, self.xx = yy, xx
        self.centre = (size - 1) / 2.0
        self.radius = 0.45 * size
        self.disc = (yy - self.centre) ** 2 + (xx - self.centre) ** 2 <= self.radius**2
        self.pixels = np.zeros((size, size, 3), dtype=np.float64)

    def background(self):
        phase = self.rng.uniform(0, 2 * np.pi, size=2)
        freq = self.rng.uniform(1.0, 3.0, size=2) * 2 * np.pi / self.size
        texture = 8.0 * np.sin(freq[0] * self.yy + phase[0]) * np.cos(freq[1] * self.xx + phase[1])
        shading = 1.0 - 0.25 * (
            ((self.yy - self.centre) ** 2 + (self.xx - self.centre) ** 2) / self.radius**2
        )
        for c in range(3):
            self.pixels[..., c] = np.where(self.disc, BACKGROUND[c] * shading + texture, 0.0)

    def point_inside(self, margin: float) -> tuple[float, float]:
        r = (self.radius - margin) * np.sqrt(self.rng.uniform())
        theta = self.rng.uniform(0, 2 * np.pi)
        return self.centre + r * np.sin(theta), self.centre + r * np.cos(theta)

    def spot(self, y: float, x: float, radius: int, colour: np.ndarray):
        # r * (r + 1) keeps a radius-1 spot a full 3x3 square
        mask = (self.yy - round(y)) ** 2 + (self.xx - round(x)) ** 2 <= radius * (radius + 1)
        self.pixels[mask & self.disc] = colour

    def filament(self, y: float, x: float, length: int, angle: float):
        for step in range(length):
            py = int(round(y + step * np.sin(angle)))
            px = int(round(x + step * np.cos(angle)))
            if 0 <= py < self.size and 0 <= px < self.size and self.disc[py, px]:
                self.pixels[py, px] = FILAMENT_COLOUR
            angle += self.rng.normal(0.0, 0.15)

    def finish(self, noise_sigma: float) -> ImageU8:
        if noise_sigma > 0:
            self.pixels += self.rng.normal(0.0, noise_sigma, size=self.pixels.shape)
        return to_u8(self.pixels)


def synth_image(
    grade: DRGrade, cfg: SynthConfig, rng: np.random.Generator
) -> tuple[ImageU8, int, bool]:
    """One image of the given grade with its microaneurysm count and new-vessel flag."""
    canvas = _Canvas(cfg.image_size, rng)
    canvas.background()

    lo, hi = MA_RANGES[grade]
    ma_count = int(rng.integers(lo, hi + 1))
    neovasc = grade == DRGrade.PROLIFERATIVE_DR
    margin = cfg.blob_radius[1] + 1

    if grade >= DRGrade.SEVERE_NPDR:
        for _ in range(int(rng.integers(cfg.blob_count[0], cfg.blob_count[1] + 1))):
            radius = int(rng.integers(cfg.blob_radius[0], cfg.blob_radius[1] + 1))
            canvas.spot(*canvas.point_inside(margin), radius, BLOB_COLOUR)
    if neovasc:
        for _ in range(int(rng.integers(cfg.filament_count[0], cfg.filament_count[1] + 1))):
            y, x = canvas.point_inside(margin)
            length = int(rng.integers(cfg.filament_length[0], cfg.filament_length[1] + 1))
            angle = rng.uniform(0, 2 * np.pi)
            canvas.filament(y, x, length, angle)
            # one side branch from the midpoint
            half = length // 2
            by, bx = y + half * np.sin(angle), x + half * np.cos(angle)
            canvas.filament(by, bx, max(2, length - half), angle + rng.choice([-0.7, 0.7]))
    for _ in range(ma_count):
        radius = int(rng.integers(cfg.dot_radius[0], cfg.dot_radius[1] + 1))
        canvas.spot(*canvas.point_inside(margin), radius, DOT_COLOUR)

    return canvas.finish(cfg.noise_sigma), ma_count, neovasc


def synth_dataset(
    n_per_class: int = 100, image_size: int = 64, seed: int = 7, cfg: SynthConfig | None = None
) -> SyntheticDataset:
    """Deterministic dataset, ``n_per_class`` images per grade, grouped by grade."""
    if cfg is None:
        cfg = SynthConfig(n_per_class=n_per_class, image_size=image_size, seed=seed)
    rng = np.random.default_rng(cfg.seed)
    images, grades, counts, flags = [], [], [], []
    for grade in DRGrade:
        for _ in range(cfg.n_per_class):
            img, ma_count, neovasc = synth_image(grade, cfg, rng)
            images.append(img)
            grades.append(int(grade))
            counts.append(ma_count)
            flags.append(neovasc)
    logger.info(
        "synthesised %d images of %dx%d (seed %d)",
        len(images),
        cfg.image_size,
        cfg.image_size,
        cfg.seed,
    )
    return SyntheticDataset(
        images=images,
        grades=np.array(grades, dtype=np.int64),
        ma_counts=np.array(counts, dtype=np.int64),
        neovascularisation=np.array(flags, dtype=bool),
    )
