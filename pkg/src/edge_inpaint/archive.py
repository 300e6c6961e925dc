"""Binary weight archive ("ECWT").

Layout, all little-endian::

    b"ECWT" | u32 version | u32 tensor count
    per tensor: u16 name length | utf-8 name | u8 rank | u32 dims[rank] | f32 data
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import WeightArchiveError

MAGIC = b"ECWT"
VERSION = 1


def write_archive(tensors: dict, path) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WeightArchiveError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr)
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightArchiveError(f"{self.path}: truncated archive at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_archive(path) -> dict:
    """Return an insertion-ordered ``name -> float32 array`` dict."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != MAGIC:
        raise WeightArchiveError(f"{path}: not a weight archive (bad magic)")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise WeightArchiveError(f"{path}: unsupported archive version {version}")
    out = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        try:
            name = r.take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WeightArchiveError(f"{path}: tensor name is not utf-8") from exc
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(r.take(4 * size), dtype="<f4").astype(np.float32).reshape(dims)
        out[name] = arr
    if r.pos != len(r.data):
        raise WeightArchiveError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    return out
