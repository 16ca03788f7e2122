"""Reader for the big-endian IDX format used by the MNIST distribution files."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..exceptions import DataError, DataFormatError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
# refuse headers that would describe absurdly large payloads
MAX_ITEMS = 1 << 31


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse(raw: bytes, expected_magic: int, path) -> np.ndarray:
    if len(raw) < 4:
        raise DataFormatError(f"{path}: truncated header at offset {len(raw)} (need 4 magic bytes)")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError(f"{path}: truncated header at offset {len(raw)} (need {header} bytes)")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    total = 1
    for d in dims:
        total *= d
        if total > MAX_ITEMS:
            raise DataFormatError(f"{path}: dimensions {dims} overflow the {MAX_ITEMS}-byte payload limit")
    if len(raw) < header + total:
        raise DataFormatError(
            f"{path}: truncated payload at offset {len(raw)}, expected {header + total} bytes for dims {dims}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=total, offset=header).reshape(dims)


def load_idx_images(path) -> np.ndarray:
    """Images flattened to rows and scaled to ``[0, 1]``."""
    arr = _parse(_read_bytes(path), IMAGE_MAGIC, path)
    return arr.reshape(arr.shape[0], -1).astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    return _parse(_read_bytes(path), LABEL_MAGIC, path).astype(np.int64)


def write_idx(path, array, magic: int) -> None:
    """Write a uint8 array in IDX layout (used for fixtures)."""
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">I", magic) + struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())
