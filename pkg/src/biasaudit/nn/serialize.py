"""Weight files.

Layout, all little-endian::

    8s   magic  b"EMOCNN\\x00\\x01"
    u32  format version
    32s  sha256 fingerprint of the NetConfig
    u64  rng seed
    u8   dtype code (4 = float32, 8 = float64)
    u32  tensor count
    per tensor, in parameter order:
        u16 name length, name (utf-8), u8 ndim, u32 * ndim shape, raw data
"""

import struct

import numpy as np

from ..errors import ConfigFingerprintMismatch, CorruptFile, VersionMismatch
from .model import CnnModel, NetConfig, param_shapes

MAGIC = b"EMOCNN\x00\x01"
VERSION = 1
_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


def dump_weights(model: CnnModel) -> bytes:
    code = model.dtype.itemsize
    parts = [MAGIC, struct.pack("<I", VERSION), model.config.fingerprint(),
             struct.pack("<QBI", model.rng_seed, code, len(model.params))]
    for name, arr in model.params.items():
        raw = name.encode()
        parts.append(struct.pack("<HB", len(raw), arr.ndim) + raw)
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def save_weights(model: CnnModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_weights(model))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptFile(f"unexpected end of file at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_weights(data: bytes, cfg: NetConfig) -> CnnModel:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CorruptFile("not a weight file (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise VersionMismatch(f"file version {version}, expected {VERSION}")
    if r.take(32) != cfg.fingerprint():
        raise ConfigFingerprintMismatch("weights were saved with a different NetConfig")
    seed, code, count = r.unpack("<QBI")
    if code not in _DTYPES:
        raise CorruptFile(f"unknown dtype code {code}")
    expected = param_shapes(cfg)
    if count != len(expected):
        raise CorruptFile(f"expected {len(expected)} tensors, found {count}")
    params = {}
    for _ in range(count):
        name_len, ndim = r.unpack("<HB")
        name = r.take(name_len).decode("utf-8", errors="replace")
        shape = r.unpack(f"<{ndim}I")
        if expected.get(name) != tuple(shape):
            raise CorruptFile(f"unexpected tensor {name} {shape}")
        nbytes = int(np.prod(shape)) * code
        params[name] = np.frombuffer(r.take(nbytes), dtype=_DTYPES[code]).reshape(shape).astype(_DTYPES[code].newbyteorder("="))
    if r.pos != len(data):
        raise CorruptFile("trailing bytes after last tensor")
    return CnnModel(cfg, params, seed)


def load_weights(path, cfg: NetConfig) -> CnnModel:
    with open(path, "rb") as fh:
        return parse_weights(fh.read(), cfg)
