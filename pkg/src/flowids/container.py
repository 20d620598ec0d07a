"""Binary container shared by checkpoints and processed-dataset files.

Layout (all integers and floats little-endian)::

    magic      8 bytes
    version    u32
    payload    format-specific
    checksum   u64, BLAKE2b (8-byte digest) of every preceding byte

Files are written to a temporary sibling and renamed into place, so a
failed write never leaves a partial file at the destination.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Wrong magic, unsupported version, or truncated payload."""


class ChecksumError(FormatError):
    """Stored checksum does not match the file contents."""


def checksum(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


class Writer:
    def __init__(self, magic: bytes, version: int):
        if len(magic) != 8:
            raise ValueError("magic must be 8 bytes")
        self.parts = [magic, struct.pack("<I", version)]

    def u8(self, v):
        self.parts.append(struct.pack("<B", v))

    def u32(self, v):
        self.parts.append(struct.pack("<I", v))

    def u64(self, v):
        self.parts.append(struct.pack("<Q", v))

    def text(self, s: str):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.parts.append(raw)

    def array(self, arr: np.ndarray, dtype):
        self.parts.append(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def finish(self) -> bytes:
        body = b"".join(self.parts)
        return body + struct.pack("<Q", checksum(body))


class Reader:
    def __init__(self, data: bytes, magic: bytes, versions):
        if len(data) < 20 or data[:8] != magic:
            raise FormatError(f"not a {magic!r} file (bad magic)")
        body, (stored,) = data[:-8], struct.unpack("<Q", data[-8:])
        if checksum(body) != stored:
            raise ChecksumError("checksum mismatch: file is corrupt")
        self.data = body
        self.pos = 8
        self.version = self.u32()
        if self.version not in versions:
            raise FormatError(f"unsupported version {self.version}")

    def _take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("truncated payload")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self):
        return struct.unpack("<B", self._take(1))[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self._take(8))[0]

    def text(self):
        return self._take(self.u32()).decode("utf-8")

    def array(self, count, dtype, shape=None):
        dt = np.dtype(dtype).newbyteorder("<")
        arr = np.frombuffer(self._take(count * dt.itemsize), dtype=dt).astype(np.dtype(dtype))
        return arr.reshape(shape) if shape is not None else arr

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")


def atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
