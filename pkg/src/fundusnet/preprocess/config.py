from dataclasses import dataclass, asdict, fields
from typing import Literal

from ..errors import ConfigError

CLIP_FRACTION_MIN = 0.002
CLIP_FRACTION_MAX = 0.005

ChannelMode = Literal["per-channel", "luminance"]


def check_clip_fraction(clip_fraction: float) -> float:
    if not (CLIP_FRACTION_MIN <= clip_fraction <= CLIP_FRACTION_MAX):
        raise ConfigError(
            f"clip_fraction must lie in [{CLIP_FRACTION_MIN}, {CLIP_FRACTION_MAX}], "
            f"got {clip_fraction}"
        )
    return float(clip_fraction)


@dataclass(frozen=True)
class EnhanceConfig:
    clip_fraction: float = 0.003
    tile_grid: tuple[int, int] = (8, 8)
    median_window: int = 3
    gaussian_sigma: float = 1.0
    channel_mode: ChannelMode = "per-channel"

    def __post_init__(self):
        check_clip_fraction(self.clip_fraction)
        rows, cols = self.tile_grid
        if rows < 1 or cols < 1:
            raise ConfigError(f"tile grid extents must be >= 1, got {self.tile_grid}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError(
                f"median_window must be a positive odd size, got {self.median_window}"
            )
        if self.gaussian_sigma <= 0:
            raise ConfigError(f"gaussian_sigma must be > 0, got {self.gaussian_sigma}")
        if self.channel_mode not in ("per-channel", "luminance"):
            raise ConfigError(f"unknown channel_mode {self.channel_mode!r}")
        # tuples read from TOML/JSON arrive as lists
        object.__setattr__(self, "tile_grid", (int(rows), int(cols)))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["tile_grid"] = list(self.tile_grid)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "EnhanceConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown enhance settings: {sorted(unknown)}")
        values = dict(data)
        if "tile_grid" in values:
            values["tile_grid"] = tuple(values["tile_grid"])
        return cls(**values)
