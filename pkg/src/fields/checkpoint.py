"""Binary checkpoint codec.

Layout (all integers and floats little-endian)::

    magic        8 bytes   b"SURFCKP1"
    version      uint32    CHECKPOINT_VERSION
    iteration    uint64    completed training iterations
    config_len   uint32    length of the UTF-8 JSON run configuration
    config       bytes
    n_tensors    uint32
    n_tensors x:
        name_len uint16, name (UTF-8)
        ndim     uint8,  dims (uint32 x ndim)
        data     float64 x prod(dims), row-major

Network parameters are stored under their own names; optimizer moments use
``adam.m/<name>`` and ``adam.v/<name>`` and the Adam step count is the
0-d tensor ``adam.step``.
"""

import io
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np
from numpy.typing import NDArray

from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"SURFCKP1"
CHECKPOINT_VERSION = 1
_F64 = np.dtype("<f8")


@dataclass
class Checkpoint:
    """Everything needed to resume training or rebuild the fields."""

    tensors: dict[str, NDArray[np.float64]]
    iteration: int = 0
    config_json: str = ""
    version: int = CHECKPOINT_VERSION

    def group(self, prefix: str) -> dict[str, NDArray[np.float64]]:
        """Tensors whose name starts with ``prefix``, prefix stripped."""
        return {k[len(prefix) :]: v for k, v in self.tensors.items() if k.startswith(prefix)}


@dataclass
class _Reader:
    path: str
    data: bytes
    pos: int = field(default=0)

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(self.path, f"truncated while reading {what}", offset=self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple[int, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def encode_checkpoint(ckpt: Checkpoint, stream: BinaryIO) -> None:
    config = ckpt.config_json.encode("utf-8")
    stream.write(MAGIC)
    stream.write(struct.pack("<IQI", ckpt.version, ckpt.iteration, len(config)))
    stream.write(config)
    stream.write(struct.pack("<I", len(ckpt.tensors)))
    for name, value in ckpt.tensors.items():
        array = np.ascontiguousarray(value, dtype=_F64)
        raw_name = name.encode("utf-8")
        stream.write(struct.pack("<H", len(raw_name)))
        stream.write(raw_name)
        stream.write(struct.pack("<B", array.ndim))
        stream.write(struct.pack(f"<{array.ndim}I", *array.shape))
        stream.write(array.tobytes(order="C"))


def write_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    """Write ``ckpt`` to ``path`` (parents created), returning the path."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.BytesIO()
    encode_checkpoint(ckpt, buffer)
    target.write_bytes(buffer.getvalue())
    logger.info("Wrote checkpoint %s (iteration %d)", target, ckpt.iteration)
    return target


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> Checkpoint:
    """Parse checkpoint bytes.

    Raises:
        CheckpointError: On a bad magic, unsupported version or truncation,
            with the byte offset of the problem.
    """
    reader = _Reader(path, data)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError(path, "not a checkpoint (bad magic)", offset=0)
    version_offset = reader.pos
    version, iteration, config_len = reader.unpack("<IQI", "header")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(path, f"unsupported version {version}", offset=version_offset)
    config = reader.take(config_len, "config").decode("utf-8")
    (count,) = reader.unpack("<I", "tensor count")

    tensors: dict[str, NDArray[np.float64]] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "name length")
        name = reader.take(name_len, "name").decode("utf-8")
        (ndim,) = reader.unpack("<B", f"rank of '{name}'")
        shape = reader.unpack(f"<{ndim}I", f"shape of '{name}'")
        size = int(np.prod(shape, dtype=np.int64))
        raw = reader.take(size * _F64.itemsize, f"data of '{name}'")
        tensors[name] = np.frombuffer(raw, dtype=_F64).reshape(shape).astype(np.float64)

    if reader.pos != len(data):
        raise CheckpointError(path, "trailing bytes after last tensor", offset=reader.pos)
    return Checkpoint(tensors=tensors, iteration=iteration, config_json=config, version=version)


def read_checkpoint(path: str | Path) -> Checkpoint:
    source = Path(path)
    try:
        data = source.read_bytes()
    except OSError as e:
        raise CheckpointError(str(source), f"cannot read checkpoint: {e}") from e
    return decode_checkpoint(data, str(source))
