from .config import TrainConfig, SamplingMode
from .sgd import SampleWeights, sgd_step, shuffle_epoch, update_sample_weights
from .trainer import (
    Samples,
    EpochStats,
    TrainHistory,
    GridRow,
    train,
    evaluate,
    grid_search,
)

__all__ = [
    "TrainConfig",
    "SamplingMode",
    "SampleWeights",
    "sgd_step",
    "shuffle_epoch",
    "update_sample_weights",
    "Samples",
    "EpochStats",
    "TrainHistory",
    "GridRow",
    "train",
    "evaluate",
    "grid_search",
]
