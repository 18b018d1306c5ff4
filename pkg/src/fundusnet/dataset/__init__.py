from .manifest import (
    ManifestRecord,
    ClassDistribution,
    MANIFEST_COLUMNS,
    load_manifest,
    write_manifest,
    validate_records,
    class_distribution,
    stratified_indices,
    stratified_split,
)
from .images import decode_image, decode_bytes, encode_png, save_png
from .synth import SynthConfig, SyntheticDataset, synth_dataset

__all__ = [
    "ManifestRecord",
    "ClassDistribution",
    "MANIFEST_COLUMNS",
    "load_manifest",
    "write_manifest",
    "validate_records",
    "class_distribution",
    "stratified_indices",
    "stratified_split",
    "decode_image",
    "decode_bytes",
    "encode_png",
    "save_png",
    "SynthConfig",
    "SyntheticDataset",
    "synth_dataset",
]
