"""Named-tensor checkpoint container.

Layout (little-endian)::

    "IMFD"            4-byte magic
    u16 version       currently 1
    u32 meta_len      followed by meta_len bytes of UTF-8 JSON metadata
    u32 count         number of tensors, then per tensor:
        u16 name_len, name (UTF-8)
        u8 dtype      0 = float64, 1 = float32
        u8 ndim, ndim x u32 dims
        payload       prod(dims) values
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"IMFD"
VERSION = 1
_DTYPES = {0: "<f8", 1: "<f4"}
_CODES = {np.dtype(np.float64): 0, np.dtype(np.float32): 1}


class CheckpointError(ValueError):
    pass


def dumps(tensors: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_blob = json.dumps(meta or {}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(meta_blob)), meta_blob, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise CheckpointError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
        raw_name = name.encode()
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<BB{arr.ndim}I", code, arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:4] != MAGIC:
        raise CheckpointError("not an IMFD checkpoint")
    try:
        version, meta_len = struct.unpack_from("<HI", blob, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        pos = 10
        meta = json.loads(blob[pos : pos + meta_len].decode())
        pos += meta_len
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + nlen].decode()
            pos += nlen
            code, ndim = struct.unpack_from("<BB", blob, pos)
            pos += 2
            dims = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            dt = np.dtype(_DTYPES[code])
            n = int(np.prod(dims)) * dt.itemsize
            if pos + n > len(blob):
                raise CheckpointError(f"truncated payload for tensor {name!r}")
            tensors[name] = np.frombuffer(blob, dtype=dt, count=n // dt.itemsize, offset=pos).reshape(dims).astype(dt.newbyteorder("="))
            pos += n
    except (struct.error, KeyError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from None
    return tensors, meta


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(tensors, meta))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
