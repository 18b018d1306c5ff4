"""Versioned binary checkpoints.

Layout (little-endian)::

    magic   4 bytes  b"FNCK"
    version u8
    crc32   u32      over the payload
    length  u64      payload byte count
    payload:
        u32 + UTF-8 JSON   network spec
        u32 + UTF-8 JSON   metadata (dtype, epochs, seed, final loss, ...)
        raw tensors        weight then bias per layer, ascending layer index
"""

import json
import logging
import math
import os
import struct
import zlib
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import (
    CheckpointError,
    ConfigError,
    CorruptCheckpointError,
    ShapeError,
    ShapeInconsistentError,
    UnsupportedVersionError,
)
from .network import LayerParams, Parameters, check_parameters, expected_shapes
from .spec import NetworkSpec

logger = logging.getLogger(__name__)

MAGIC = b"FNCK"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sBIQ")
LENGTH = struct.Struct("<I")
WIRE_DTYPES = {"float32": "<f4", "float64": "<f8"}


@dataclass
class CheckpointMetadata:
    epochs_completed: int = 0
    seed: int | None = None
    final_loss: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class Checkpoint:
    spec: NetworkSpec
    params: Parameters
    metadata: CheckpointMetadata = field(default_factory=CheckpointMetadata)


def _encode_metadata(ckpt: Checkpoint) -> bytes:
    meta = asdict(ckpt.metadata)
    if meta["final_loss"] is not None and not math.isfinite(meta["final_loss"]):
        meta["final_loss"] = None
    meta["dtype"] = ckpt.params.dtype.name
    return json.dumps(meta, sort_keys=True).encode("utf-8")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    check_parameters(ckpt.spec, ckpt.params)
    dtype = ckpt.params.dtype.name
    if dtype not in WIRE_DTYPES:
        raise ConfigError(f"cannot checkpoint parameters of dtype {dtype}")
    spec_bytes = json.dumps(ckpt.spec.to_dict(), sort_keys=True).encode("utf-8")
    meta_bytes = _encode_metadata(ckpt)
    chunks = [LENGTH.pack(len(spec_bytes)), spec_bytes, LENGTH.pack(len(meta_bytes)), meta_bytes]
    for _, _, tensor in ckpt.params.tensors():
        chunks.append(np.ascontiguousarray(tensor, dtype=WIRE_DTYPES[dtype]).tobytes())
    payload = b"".join(chunks)
    header = HEADER.pack(MAGIC, FORMAT_VERSION, zlib.crc32(payload), len(payload))
    return header + payload


def _read_block(payload: bytes, offset: int) -> tuple[bytes, int]:
    if offset + LENGTH.size > len(payload):
        raise CorruptCheckpointError("checkpoint payload ends inside a length prefix")
    (size,) = LENGTH.unpack_from(payload, offset)
    offset += LENGTH.size
    if offset + size > len(payload):
        raise CorruptCheckpointError("checkpoint payload ends inside a text block")
    return payload[offset : offset + size], offset + size


def decode_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < HEADER.size:
        raise CorruptCheckpointError("file is shorter than the checkpoint header")
    magic, version, crc, length = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    payload = data[HEADER.size :]
    if len(payload) != length:
        raise CorruptCheckpointError(
            f"payload is {len(payload)} bytes, header announces {length}"
        )
    if zlib.crc32(payload) != crc:
        raise CorruptCheckpointError("payload CRC mismatch")

    spec_bytes, offset = _read_block(payload, 0)
    meta_bytes, offset = _read_block(payload, offset)
    try:
        spec = NetworkSpec.from_dict(json.loads(spec_bytes))
        meta = json.loads(meta_bytes)
    except (ValueError, KeyError, TypeError) as e:
        raise ShapeInconsistentError(f"checkpoint spec/metadata is invalid: {e}") from e

    dtype = meta.pop("dtype", None)
    if dtype not in WIRE_DTYPES:
        raise CorruptCheckpointError(f"unknown parameter dtype {dtype!r}")
    wire = np.dtype(WIRE_DTYPES[dtype])
    layers = {}
    for index, (w_shape, b_shape) in expected_shapes(spec).items():
        arrays = []
        for shape in (w_shape, b_shape):
            count = int(np.prod(shape))
            end = offset + count * wire.itemsize
            if end > len(payload):
                raise ShapeInconsistentError(
                    f"layer {index}: parameter data ends early for shape {shape}"
                )
            flat = np.frombuffer(payload, dtype=wire, count=count, offset=offset)
            arrays.append(flat.astype(np.dtype(dtype)).reshape(shape))
            offset = end
        layers[index] = LayerParams(*arrays)
    if offset != len(payload):
        raise ShapeInconsistentError(
            f"{len(payload) - offset} trailing bytes after the parameters declared by the network spec"
        )
    params = Parameters(layers)
    try:
        check_parameters(spec, params)
    except ShapeError as e:
        raise ShapeInconsistentError(str(e)) from e
    metadata = CheckpointMetadata(
        epochs_completed=int(meta.get("epochs_completed", 0)),
        seed=meta.get("seed"),
        final_loss=meta.get("final_loss"),
        extra=dict(meta.get("extra", {})),
    )
    return Checkpoint(spec, params, metadata)


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> Path:
    path = Path(path)
    data = encode_checkpoint(ckpt)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    logger.info("saved checkpoint %s (%d bytes)", path, len(data))
    return path


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    try:
        return decode_checkpoint(data)
    except CorruptCheckpointError as e:
        raise type(e)(f"{path}: {e}") from e
