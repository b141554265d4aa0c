"""Binary tensor records and named-checkpoint container.

Single tensor record layout (all integers little-endian):

    magic  b"LWT1"
    u8     dtype code: 0 = float32, 1 = float64
    u8     rank
    u32    dim[rank]
    raw    row-major payload, little-endian floats

Checkpoint container: a versioned header followed by ordered named records,
each a length-prefixed UTF-8 name plus an embedded tensor record. Order is
preserved so loading can be strict about what it expects.

    magic  b"LWTC"
    u16    version (currently 1)
    u32    length of UTF-8 JSON metadata block
    bytes  metadata (possibly empty)
    u32    record count
    then per record: u16 name length, name bytes, tensor record
"""
from __future__ import annotations

import io
import json
import struct
from collections import OrderedDict

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"LWT1"
CHECKPOINT_MAGIC = b"LWTC"
CHECKPOINT_VERSION = 1

_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_KIND_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_MAX_RANK = 8


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated stream while reading {what} ({len(buf)}/{n} bytes)")
    return buf


def write_tensor(f, array):
    """Write one array as an LWT1 record to a binary stream."""
    arr = np.asarray(array)
    code = _KIND_TO_CODE.get(np.dtype(arr.dtype))
    if code is None:
        raise FormatError(f"dtype {arr.dtype} is not storable; use float32 or float64")
    if arr.ndim > _MAX_RANK:
        raise FormatError(f"rank {arr.ndim} exceeds the format limit of {_MAX_RANK}")
    f.write(TENSOR_MAGIC)
    f.write(struct.pack("<BB", code, arr.ndim))
    for dim in arr.shape:
        f.write(struct.pack("<I", dim))
    f.write(np.ascontiguousarray(arr, dtype=_CODE_TO_DTYPE[code]).tobytes())


def read_tensor(f):
    """Read one LWT1 record from a binary stream."""
    magic = _read_exact(f, 4, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}, expected {TENSOR_MAGIC!r}")
    code, rank = struct.unpack("<BB", _read_exact(f, 2, "header"))
    dtype = _CODE_TO_DTYPE.get(code)
    if dtype is None:
        raise FormatError(f"unknown dtype code {code}")
    if rank > _MAX_RANK:
        raise FormatError(f"rank {rank} exceeds the format limit of {_MAX_RANK}")
    shape = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims")) if rank else ()
    count = 1
    for dim in shape:
        count *= dim
    payload = _read_exact(f, count * dtype.itemsize, "payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return arr.astype(dtype.newbyteorder("="), copy=True)


def save_tensor(path, array):
    with open(path, "wb") as f:
        write_tensor(f, array)


def load_tensor(path):
    with open(path, "rb") as f:
        arr = read_tensor(f)
        if f.read(1):
            raise FormatError("trailing bytes after tensor record")
    return arr


def save_checkpoint(path, named_arrays, meta=None):
    """Write an ordered name -> array mapping plus optional JSON metadata."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<H", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(named_arrays)))
        for name, arr in named_arrays.items():
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"record name too long: {name[:40]}...")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            write_tensor(f, arr)


def load_checkpoint(path):
    """Read a checkpoint; returns (OrderedDict name -> array, meta dict)."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        (version,) = struct.unpack("<H", _read_exact(f, 2, "version"))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", _read_exact(f, 4, "meta length"))
        try:
            meta = json.loads(_read_exact(f, meta_len, "metadata").decode("utf-8")) if meta_len else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt checkpoint metadata: {exc}") from exc
        (count,) = struct.unpack("<I", _read_exact(f, 4, "record count"))
        records = OrderedDict()
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            if name in records:
                raise FormatError(f"duplicate record name '{name}'")
            records[name] = read_tensor(f)
        if f.read(1):
            raise FormatError("trailing bytes after final record")
    return records, meta


def dumps_tensor(array):
    buf = io.BytesIO()
    write_tensor(buf, array)
    return buf.getvalue()


def loads_tensor(blob):
    buf = io.BytesIO(blob)
    arr = read_tensor(buf)
    if buf.read(1):
        raise FormatError("trailing bytes after tensor record")
    return arr
