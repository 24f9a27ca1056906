"""Binary checkpoint format.

    magic "CDNT" | u32 version=1 | u32 tensor count
    per tensor: u16 name length | name utf-8 | u8 dtype (0=f32, 1=f64)
                | u8 rank | rank x u32 extents | little-endian payload
    trailing u32 CRC32 of all preceding bytes

All integers little-endian. Round-trips are bit-exact; a CRC mismatch
raises ChecksumError. Only learned parameters belong here - anything
regenerated per input (like the conditional kernels) must not be saved.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ChecksumError, DimensionError, ParseError

MAGIC = b"CDNT"
VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def serialize(tensors: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        if arr.dtype not in _DTYPE_CODES:
            raise DimensionError(f"checkpoint tensor {name!r} has dtype {arr.dtype}; "
                                 "only float32/float64 are storable")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DimensionError(f"tensor name too long: {name[:32]!r}...")
        if arr.ndim > 0xFF:
            raise DimensionError(f"tensor rank {arr.ndim} too large")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        code = _DTYPE_CODES[arr.dtype]
        chunks.append(np.ascontiguousarray(arr, dtype=_CODE_DTYPES[code]).tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def deserialize(data: bytes) -> dict[str, np.ndarray]:
    if len(data) < len(MAGIC) + 12:
        raise ParseError("checkpoint too short", len(data))
    body, stored = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise ChecksumError("checkpoint CRC32 mismatch: file is corrupt")

    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(body):
            raise ParseError(f"checkpoint truncated while reading {what}", pos)
        out = body[pos:pos + n]
        pos += n
        return out

    if take(4, "magic") != MAGIC:
        raise ParseError("bad checkpoint magic", 0)
    version, count = struct.unpack("<II", take(8, "header"))
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version}", 4)
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2, "dtype/rank"))
        if dtype_code not in _CODE_DTYPES:
            raise ParseError(f"unknown dtype code {dtype_code}", pos - 2)
        shape = struct.unpack(f"<{rank}I", take(4 * rank, "extents"))
        n_items = int(np.prod(shape)) if rank else 1
        dt = _CODE_DTYPES[dtype_code]
        payload = take(n_items * dt.itemsize, f"payload of {name!r}")
        arr = np.frombuffer(payload, dtype=dt).reshape(shape)
        tensors[name] = np.ascontiguousarray(arr).astype(dt.newbyteorder("="))
    if pos != len(body):
        raise ParseError(f"{len(body) - pos} trailing bytes after last tensor", pos)
    return tensors


def save_checkpoint(path: Path, tensors: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(serialize(tensors))


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    return deserialize(Path(path).read_bytes())
