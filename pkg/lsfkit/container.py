# lsfkit - Learned static functions
# Copyright (C) 2026 lsfkit contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import struct
import zlib

import numpy as np

from .custom_types import BadMagic, ChecksumMismatch, StructureKind, TruncatedInput, VersionMismatch

MAGIC = b'LSF1'
FORMAT_VERSION = 1


class ByteWriter:
    """
    Appends little-endian records to a growing byte buffer
    """

    def __init__(self):
        self.buffer = bytearray()

    def u8(self, value: int) -> None:
        self.buffer += struct.pack('<B', value)

    def u16(self, value: int) -> None:
        self.buffer += struct.pack('<H', value)

    def u32(self, value: int) -> None:
        self.buffer += struct.pack('<I', value)

    def u64(self, value: int) -> None:
        self.buffer += struct.pack('<Q', value)

    def f64(self, value: float) -> None:
        self.buffer += struct.pack('<d', value)

    def raw(self, data: bytes) -> None:
        self.buffer += data

    def blob(self, data: bytes) -> None:
        """Length-prefixed (u32) byte string"""
        self.u32(len(data))
        self.buffer += data

    def array(self, values: np.ndarray, dtype: str) -> None:
        """Fixed-width little-endian array without length prefix"""
        self.buffer += np.ascontiguousarray(values, dtype=dtype).tobytes()

    def header(self, kind: StructureKind) -> None:
        """Magic, format version and structure kind"""
        self.raw(MAGIC)
        self.u16(FORMAT_VERSION)
        self.u8(kind)

    def with_checksum(self) -> bytes:
        """
        Returns the buffer followed by a CRC-32 trailer over all preceding bytes

        :return: Finished container bytes
        """
        return bytes(self.buffer) + struct.pack('<I', zlib.crc32(self.buffer))


class ByteReader:
    """
    Reads little-endian records with bounds checking
    """

    def __init__(self, data: bytes, offset: int = 0):
        self.data = memoryview(data)
        self.pos = offset

    def _take(self, size: int) -> memoryview:
        if size < 0 or self.pos + size > len(self.data):
            raise TruncatedInput(f'Container ended at byte {len(self.data)} while reading {size} bytes at offset {self.pos}')
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack('<H', self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack('<I', self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack('<Q', self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack('<d', self._take(8))[0]

    def raw(self, size: int) -> bytes:
        return bytes(self._take(size))

    def blob(self) -> bytes:
        return self.raw(self.u32())

    def array(self, count: int, dtype: str) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self._take(size), dtype=dtype).copy()

    def header(self, expected: StructureKind | tuple[StructureKind, ...]) -> StructureKind:
        """
        Reads and validates magic, version and structure kind

        :param expected: Accepted structure kind(s)
        :return: Structure kind found
        """
        if self.raw(len(MAGIC)) != MAGIC:
            raise BadMagic('Input is not an lsfkit container')
        version = self.u16()
        if version != FORMAT_VERSION:
            raise VersionMismatch(f'Container format version mismatch. Expected: {FORMAT_VERSION}, Got: {version}')
        raw_kind = self.u8()
        if raw_kind not in StructureKind.__members__.values():
            raise BadMagic(f'Unknown structure kind {raw_kind}')
        kind = StructureKind(raw_kind)
        accepted = expected if isinstance(expected, tuple) else (expected,)
        if kind not in accepted:
            raise BadMagic(f'Unexpected structure kind {kind.name}')
        return kind

    def remaining(self) -> int:
        return len(self.data) - self.pos


def verify_checksum(data: bytes) -> bytes:
    """
    Validates the CRC-32 trailer of a container

    :param data: Container bytes including trailer
    :return: Container bytes without trailer
    :raises ChecksumMismatch: If the trailer does not match
    """
    if len(data) < len(MAGIC) + 4:
        raise TruncatedInput('Container is too short')
    if bytes(data[:len(MAGIC)]) != MAGIC:
        raise BadMagic('Input is not an lsfkit container')
    body, trailer = data[:-4], data[-4:]
    if zlib.crc32(body) != struct.unpack('<I', trailer)[0]:
        raise ChecksumMismatch('Container checksum does not match its contents')
    return body
