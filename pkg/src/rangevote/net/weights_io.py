"""Binary weight-file format.

Little-endian layout:

    magic            6 bytes  b"DROW3X"
    format version   u32
    config length    u32, followed by that many bytes of UTF-8 JSON
                     (the ModelConfig fields)
    tensor count     u32
    per tensor:      name length u16, name bytes,
                     dtype code u8 (0 = float32, 1 = float64),
                     ndim u8, each dimension u32,
                     data offset u64, data byte length u64
    data blob        raw little-endian tensor data, offsets relative to
                     the blob start

Round-trips are bit-exact. The format is self-describing enough for other
implementations to exchange weights; see the README for the same layout in
prose.
"""
from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .model import ModelConfig, ModelParams

MAGIC = b"DROW3X"
FORMAT_VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class WeightsFormatError(Exception):
    """Raised for unreadable, corrupt, or mismatched weight files."""


def config_to_dict(config: ModelConfig) -> dict:
    d = dataclasses.asdict(config)
    d["stage_channels"] = list(d["stage_channels"])
    return d


def config_from_dict(d: dict) -> ModelConfig:
    d = dict(d)
    d["stage_channels"] = tuple(d["stage_channels"])
    return ModelConfig(**d)


def save_params(path, params: ModelParams, config: ModelConfig) -> None:
    config_json = json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    table = bytearray()
    blob = bytearray()
    for name in params.names:
        arr = params[name]
        code = _DTYPE_CODES.get(np.dtype(arr.dtype))
        if code is None:
            raise WeightsFormatError(f"unsupported tensor dtype {arr.dtype} for {name}")
        data = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        name_b = name.encode("utf-8")
        table += struct.pack("<H", len(name_b)) + name_b
        table += struct.pack("<BB", code, arr.ndim)
        table += struct.pack(f"<{arr.ndim}I", *arr.shape)
        table += struct.pack("<QQ", len(blob), len(data))
        blob += data
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(config_json)))
        f.write(config_json)
        f.write(struct.pack("<I", len(params.names)))
        f.write(table)
        f.write(blob)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError("truncated weight file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_params(path, expected_config: ModelConfig | None = None):
    """Read a weight file; returns (params, config).

    If expected_config is given, the stored configuration must match it
    exactly (a fusion-mode or width mismatch is an error, not a warning).
    """
    with open(path, "rb") as f:
        raw = f.read()
    r = _Reader(raw)
    if r.take(len(MAGIC)) != MAGIC:
        raise WeightsFormatError("not a weight file (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise WeightsFormatError(f"unsupported format version {version}")
    (config_len,) = r.unpack("<I")
    try:
        config = config_from_dict(json.loads(r.take(config_len).decode("utf-8")))
    except (ValueError, TypeError, KeyError) as e:
        raise WeightsFormatError(f"corrupt embedded config: {e}") from e
    (count,) = r.unpack("<I")
    entries = []
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise WeightsFormatError(f"unknown dtype code {code} for {name}")
        shape = r.unpack(f"<{ndim}I")
        offset, nbytes = r.unpack("<QQ")
        entries.append((name, code, shape, offset, nbytes))
    blob = raw[r.pos:]
    tensors = {}
    for name, code, shape, offset, nbytes in entries:
        dtype = _DTYPES[code]
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if nbytes != expected or offset + nbytes > len(blob):
            raise WeightsFormatError(f"corrupt tensor record for {name}")
        tensors[name] = np.frombuffer(blob, dtype=dtype, count=expected // dtype.itemsize,
                                      offset=offset).reshape(shape).copy()
    if expected_config is not None and config != expected_config:
        raise WeightsFormatError(
            f"config mismatch: file has {config_to_dict(config)}, "
            f"expected {config_to_dict(expected_config)}")
    return ModelParams(tensors), config
