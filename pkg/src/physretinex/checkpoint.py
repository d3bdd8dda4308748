"""Binary tensor container.

Little-endian layout:

    magic   4 bytes  "RDV2"
    version u32      (currently 1)
    count   u32      number of tensors
    per tensor:
        name_len u16, name bytes (UTF-8)
        dtype    u8   (0 = float32, 1 = float64)
        ndim     u8
        dims     u32 * ndim
        data     raw C-order array bytes
    crc32   u32      CRC-32 of every preceding byte

Tensors are written sorted by name, so identical contents give identical
files. Loading validates magic, version, bounds, and the checksum, and
names the failing field on error.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptCheckpointError

MAGIC = b"RDV2"
VERSION = 1

_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def serialize(tensors):
    """Encode a {name: ndarray} mapping to checkpoint bytes."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name])
        if not arr.flags["C_CONTIGUOUS"]:
            # ascontiguousarray would also promote 0-d arrays to shape (1,)
            arr = np.ascontiguousarray(arr)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.float64)
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:32]}...")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def deserialize(blob):
    """Decode checkpoint bytes to a {name: ndarray} mapping."""
    if len(blob) < 16:
        raise CorruptCheckpointError("file too short for header and checksum")
    body, (crc_stored,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise CorruptCheckpointError("crc32 mismatch")
    if body[:4] != MAGIC:
        raise CorruptCheckpointError(f"magic: expected {MAGIC!r}, got {body[:4]!r}")
    version, count = struct.unpack("<II", body[4:12])
    if version != VERSION:
        raise CorruptCheckpointError(f"version: unsupported {version}")
    pos = 12
    out = {}

    def take(n, what):
        nonlocal pos
        if pos + n > len(body):
            raise CorruptCheckpointError(f"{what}: truncated")
        chunk = body[pos : pos + n]
        pos += n
        return chunk

    for i in range(count):
        (name_len,) = struct.unpack("<H", take(2, f"tensor {i} name_len"))
        try:
            name = take(name_len, f"tensor {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptCheckpointError(f"tensor {i} name: invalid UTF-8") from None
        dtype_code, ndim = struct.unpack("<BB", take(2, f"{name} dtype/ndim"))
        if dtype_code not in _CODE_DTYPES:
            raise CorruptCheckpointError(f"{name} dtype: unknown code {dtype_code}")
        dims = struct.unpack(f"<{ndim}I", take(4 * ndim, f"{name} dims"))
        dtype = _CODE_DTYPES[dtype_code]
        n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize if ndim else dtype.itemsize
        arr = np.frombuffer(take(n_bytes, f"{name} data"), dtype=dtype).reshape(dims)
        if name in out:
            raise CorruptCheckpointError(f"{name}: duplicate tensor name")
        out[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    if pos != len(body):
        raise CorruptCheckpointError(f"trailing bytes: {len(body) - pos} after last tensor")
    return out


def save_checkpoint(tensors, path):
    blob = serialize(tensors)
    with open(path, "wb") as fh:
        fh.write(blob)
    return blob


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
