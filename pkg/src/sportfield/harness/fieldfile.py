"""Binary FieldSet container.

Layout (all integers unsigned 32-bit little-endian unless noted)::

    b"DSLF" | version | width | height | stride | n_types
    then one block per tensor:
    tag (u8) | ndim (u8) | dims[ndim] | float32 LE data, row-major

Sizes and scales are written in log space, as held in memory, so a
float32 FieldSet round-trips bit-exactly.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from ..core import NUM_TYPES, DomainError, FieldSet, GridSpec, TENSOR_NAMES

MAGIC = b"DSLF"
VERSION = 1
TAGS = {name: i + 1 for i, name in enumerate(TENSOR_NAMES)}
_HEADER = struct.Struct("<4s5I")


class FormatError(DomainError):
    """Malformed, truncated or unsupported field file."""


def dumps(fields: FieldSet) -> bytes:
    g = fields.grid
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, g.width, g.height, g.stride, NUM_TYPES))
    for name in TENSOR_NAMES:
        arr = np.ascontiguousarray(getattr(fields, name), dtype="<f4")
        buf.write(struct.pack("<BB", TAGS[name], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    return buf.getvalue()


def loads(data: bytes) -> FieldSet:
    """Parse a field file; arrays come back as float32."""
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, width, height, stride, n_types = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if n_types != NUM_TYPES:
        raise FormatError(f"expected {NUM_TYPES} keypoint types, got {n_types}")
    try:
        grid = GridSpec(width, height, stride)
    except DomainError as exc:
        raise FormatError(str(exc)) from None
    pos = _HEADER.size
    by_tag = {v: k for k, v in TAGS.items()}
    tensors = {}
    while pos < len(data):
        if pos + 2 > len(data):
            raise FormatError("truncated block header")
        tag, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        name = by_tag.get(tag)
        if name is None or name in tensors:
            raise FormatError(f"unexpected tensor tag {tag}")
        if pos + 4 * ndim > len(data):
            raise FormatError("truncated dims")
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        nbytes = 4 * int(np.prod(dims, dtype=np.int64))
        if pos + nbytes > len(data):
            raise FormatError(f"truncated {name} data")
        tensors[name] = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=pos).reshape(dims).astype(np.float32)
        pos += nbytes
    missing = [n for n in TENSOR_NAMES if n not in tensors]
    if missing:
        raise FormatError(f"missing tensors {missing}")
    try:
        return FieldSet(grid, **tensors)
    except DomainError as exc:
        raise FormatError(str(exc)) from None


def write(fields: FieldSet, path) -> None:
    Path(path).write_bytes(dumps(fields))


def read(path) -> FieldSet:
    return loads(Path(path).read_bytes())
