"""Binary checkpoint format.

Layout, all integers little-endian::

    b"TSGR"            magic
    u32                format version (1)
    u8                 axis (0 = row, 1 = column)
    u8                 cell (0 = GRU, 1 = LSTM)
    u32, u32           input_dim D, hidden_dim H
    f32[...]           parameter blocks in ``model.param_shapes`` order,
                       each row-major
    u32                CRC32 of every preceding byte
"""

import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import InvalidInputError
from .model import Axis, Cell, ModelConfig, ModelParams, param_shapes

MAGIC = b"TSGR"
VERSION = 1
_HEADER = struct.Struct("<4sIBBII")
_AXIS_CODES = {Axis.ROW: 0, Axis.COLUMN: 1}
_CELL_CODES = {Cell.GRU: 0, Cell.LSTM: 1}


class CheckpointError(InvalidInputError):
    pass


def to_bytes(params):
    cfg = params.config
    parts = [_HEADER.pack(MAGIC, VERSION, _AXIS_CODES[cfg.axis], _CELL_CODES[cfg.cell],
                          cfg.input_dim, cfg.hidden_dim)]
    for name in param_shapes(cfg):
        parts.append(np.ascontiguousarray(params.arrays[name], dtype="<f4").tobytes())
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def from_bytes(data):
    if len(data) < _HEADER.size + 4:
        raise CheckpointError("checkpoint truncated")
    payload, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(payload) != crc:
        raise CheckpointError("checkpoint CRC mismatch")
    magic, version, axis, cell, D, H = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        axis = {v: k for k, v in _AXIS_CODES.items()}[axis]
        cell = {v: k for k, v in _CELL_CODES.items()}[cell]
    except KeyError:
        raise CheckpointError("unknown axis or cell code") from None
    cfg = ModelConfig(axis, cell, D, H)
    shapes = param_shapes(cfg)
    expected = _HEADER.size + 4 * sum(int(np.prod(s)) for s in shapes.values())
    if len(payload) != expected:
        raise CheckpointError(f"payload is {len(payload)} bytes, expected {expected}")
    arrays = {}
    offset = _HEADER.size
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        block = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        arrays[name] = block.astype(np.float64).reshape(shape)
        offset += 4 * count
    return ModelParams(cfg, arrays)


def atomic_write(path, data):
    """Write bytes (or str) to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(params, path):
    atomic_write(path, to_bytes(params))


def load(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
