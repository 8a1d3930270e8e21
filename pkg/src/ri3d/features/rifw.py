"""RIFW tensor container.

Layout (all little-endian)::

    b"RIFW"  u32 version=1  u32 tensor_count
    per tensor: u16 name_len, utf-8 name, u8 rank, rank x u32 dims,
                prod(dims) x float32 values (row-major)
"""

import struct
from pathlib import Path

import numpy as np

from ri3d.errors import BadMagic, TruncatedFile, UnsupportedFormat

MAGIC = b"RIFW"
VERSION = 1


def encode(tensors) -> bytes:
    """Serialize an ordered mapping or sequence of ``(name, array)`` pairs."""
    items = list(tensors.items()) if hasattr(tensors, "items") else list(tensors)
    out = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, arr in items:
        arr = np.asarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        out.append(struct.pack("<H", len(raw)))
        out.append(raw)
        out.append(struct.pack("<B", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.pos + size
        if end > len(self.data):
            raise TruncatedFile(f"truncated RIFW data while reading {what} at byte {self.pos}")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(data: bytes) -> dict[str, np.ndarray]:
    """Parse RIFW bytes into an insertion-ordered ``{name: float32 array}``."""
    r = _Reader(bytes(data))
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    r.take(4, "magic")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise UnsupportedFormat(f"unsupported RIFW version {version}")
    (count,) = r.unpack("<I", "tensor count")
    tensors = {}
    for i in range(count):
        (name_len,) = r.unpack("<H", f"tensor {i} name length")
        name = r.take(name_len, f"tensor {i} name").decode("utf-8")
        (rank,) = r.unpack("<B", f"tensor {name!r} rank")
        dims = r.unpack(f"<{rank}I", f"tensor {name!r} dims")
        size = int(np.prod(dims, dtype=np.int64))
        raw = r.take(4 * size, f"tensor {name!r} values")
        tensors[name] = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(data):
        raise UnsupportedFormat(f"{len(data) - r.pos} trailing bytes after {count} tensors")
    return tensors


def save(tensors, path) -> None:
    Path(path).write_bytes(encode(tensors))


def load(path) -> dict[str, np.ndarray]:
    return decode(Path(path).read_bytes())
