from dataclasses import dataclass, asdict, fields, replace
from typing import Literal

from ..core.ops import LOSS_ALIASES, LossForm
from ..core.tensor import Precision
from ..errors import ConfigError

SamplingMode = Literal["uniform", "informative"]

DEFAULT_LEARNING_RATE = 0.001
DEFAULT_WEIGHT_DECAY = 5e-5


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    weight_decay: float = DEFAULT_WEIGHT_DECAY
    batch_size: int = 1
    epochs: int = 20
    seed: int = 0
    sampling_mode: SamplingMode = "uniform"
    loss_form: LossForm = "binary_sum"
    # each mini-batch draws the classes in equal proportion
    balanced_batches: bool = False
    precision: Precision = "single"

    def __post_init__(self):
        object.__setattr__(self, "loss_form", LOSS_ALIASES.get(self.loss_form, self.loss_form))
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.sampling_mode not in ("uniform", "informative"):
            raise ConfigError(f"unknown sampling mode {self.sampling_mode!r}")
        if self.loss_form not in ("binary_sum", "categorical"):
            raise ConfigError(f"unknown loss form {self.loss_form!r}")
        if self.precision not in ("single", "double"):
            raise ConfigError(f"unknown precision {self.precision!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **overrides) -> "TrainConfig":
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown train settings: {sorted(unknown)}")
        return cls(**data)
