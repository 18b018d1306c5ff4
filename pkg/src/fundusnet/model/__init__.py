from .spec import (
    LayerSpec,
    Conv,
    ReLU,
    MaxPool2,
    Flatten,
    FullyConnected,
    Softmax,
    NetworkSpec,
    ARCHITECTURES,
    edlm_default_spec,
    edlm_compact_spec,
    infer_shapes,
    count_parameters,
    summarize,
)
from .network import (
    LayerParams,
    Parameters,
    init_parameters,
    zeros_like,
    image_to_input,
    forward,
    predict,
)
from .checkpoint import (
    Checkpoint,
    CheckpointMetadata,
    save_checkpoint,
    load_checkpoint,
)
from .gradcheck import GradCheckReport, gradcheck_suite

__all__ = [
    "LayerSpec",
    "Conv",
    "ReLU",
    "MaxPool2",
    "Flatten",
    "FullyConnected",
    "Softmax",
    "NetworkSpec",
    "ARCHITECTURES",
    "edlm_default_spec",
    "edlm_compact_spec",
    "infer_shapes",
    "count_parameters",
    "summarize",
    "LayerParams",
    "Parameters",
    "init_parameters",
    "zeros_like",
    "image_to_input",
    "forward",
    "predict",
    "Checkpoint",
    "CheckpointMetadata",
    "save_checkpoint",
    "load_checkpoint",
    "GradCheckReport",
    "gradcheck_suite",
]
