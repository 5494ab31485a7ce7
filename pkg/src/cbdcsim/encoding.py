"""Canonical byte encodings.

Every structure that is hashed, signed, or sent over the simulated wire is
serialized through these helpers so that encodings are byte-stable across
runs.  Integers are big-endian fixed width; lists carry a 4-byte big-endian
count; variable byte strings carry a 4-byte length prefix.
"""

from __future__ import annotations

import hashlib
import json
import struct

from .errors import DecodeError


def u8(x: int) -> bytes:
    return struct.pack(">B", x)


def u16(x: int) -> bytes:
    return struct.pack(">H", x)


def u32(x: int) -> bytes:
    return struct.pack(">I", x)


def u64(x: int) -> bytes:
    return struct.pack(">Q", x)


def lp(data: bytes) -> bytes:
    """Length-prefixed byte string."""
    return u32(len(data)) + data


def sha256(*chunks: bytes) -> bytes:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.digest()


def canonical_json(obj) -> bytes:
    """Deterministic JSON bytes: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


class ByteReader:
    """Sequential reader over a canonical encoding.

    Raises DecodeError on underrun or trailing garbage so malformed wire
    data is distinguishable from a verification failure.
    """

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise DecodeError(f"short read: wanted {n} bytes at offset {self._pos}")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp_bytes(self, max_len: int = 1 << 24) -> bytes:
        n = self.u32()
        if n > max_len:
            raise DecodeError(f"length prefix {n} exceeds cap {max_len}")
        return self.take(n)

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_end(self) -> None:
        if self.remaining:
            raise DecodeError(f"{self.remaining} trailing bytes")
