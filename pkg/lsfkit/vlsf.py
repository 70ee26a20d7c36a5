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

"""
Variable-length static functions built from L interleaved 1-bit ribbons that
share start positions and bumping thresholds, plus the masked filter variant
that stores fingerprint bits for the ONE positions of a bit pattern.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .container import ByteReader, ByteWriter, verify_checksum
from .custom_types import BuildConfig, StreamExhausted, StructureKind, Symbol
from .hashing import derive_parts, fingerprint_word, rehash, ribbon_offset
from .ribbon import BumpedLayer, build_layers, read_layers, write_layers

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BitString:
    """
    Finite bit string. Bit i of the string is bit i of `bits`.
    """
    length: int
    bits: int = 0

    def __post_init__(self):
        if self.length < 0 or self.bits >> self.length:
            raise ValueError(f'Bits {self.bits:#x} do not fit into {self.length} positions')

    @staticmethod
    def from_str(text: str) -> 'BitString':
        """Parses a string like '101', first character is bit 0"""
        bits = 0
        for i, c in enumerate(text):
            if c not in '01':
                raise ValueError(f'Invalid bit character {c!r}')
            bits |= (c == '1') << i
        return BitString(len(text), bits)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def __str__(self) -> str:
        return ''.join(str((self.bits >> i) & 1) for i in range(self.length))


@dataclass(frozen=True)
class BitPattern:
    """
    Filter pattern over {ONE, ANY}. Bit i of `ones` is set iff position i is ONE.
    """
    length: int
    ones: int = 0

    def __post_init__(self):
        if self.length < 0 or self.ones >> self.length:
            raise ValueError(f'Pattern {self.ones:#x} does not fit into {self.length} positions')

    @staticmethod
    def from_str(text: str) -> 'BitPattern':
        """Parses a string like '1?1', '?' being ANY"""
        ones = 0
        for i, c in enumerate(text):
            if c not in '1?':
                raise ValueError(f'Invalid pattern character {c!r}')
            ones |= (c == '1') << i
        return BitPattern(len(text), ones)

    @staticmethod
    def from_symbols(symbols: Sequence[Symbol]) -> 'BitPattern':
        ones = 0
        for i, s in enumerate(symbols):
            ones |= (s == Symbol.ONE) << i
        return BitPattern(len(symbols), ones)

    @property
    def stored_bits(self) -> int:
        """Number of ONE positions"""
        return self.ones.bit_count()

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> Symbol:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return Symbol((self.ones >> i) & 1)

    def __str__(self) -> str:
        return ''.join('1' if (self.ones >> i) & 1 else '?' for i in range(self.length))


class BitStream:
    """
    Lazily evaluated stream of up to L bits produced by one query. Reads past
    bit L - 1 raise StreamExhausted.
    """

    def __init__(self, structure: 'VlBurr', d: int, match: bool = False):
        self.structure = structure
        self.d = d
        self.match = match
        self.length = structure.ribbons
        self.position = 0

        self._layer = None
        self._fallback = None
        resolved = structure.resolve(d)
        if isinstance(resolved, tuple):
            self._layer, self._start, self._coeffs, self._b = resolved
        else:
            self._fallback = resolved

    def raw_bit(self, i: int) -> int:
        """Stored bit i without unmasking"""
        if not 0 <= i < self.length:
            raise StreamExhausted(f'Bit {i} requested from a stream of {self.length} bits')
        if self._layer is None:
            return (self._fallback >> i) & 1
        ribbon = (self._b + i) % self.length
        return (self._coeffs & self._layer.window(ribbon, self._start)).bit_count() & 1

    def bit(self, i: int) -> int:
        """
        Bit i of the stream. For filter streams this is the match indicator.

        :param i: Bit index
        :return: Stream bit
        """
        raw = self.raw_bit(i)
        if self.match:
            return raw ^ fingerprint_word(self.d, i, 1) ^ 1
        return raw

    def read(self, count: int) -> int:
        """
        Reads the next `count` bits starting at the cursor and advances it

        :param count: Number of bits to read
        :return: Bits as integer, first bit at position 0
        """
        if self.position + count > self.length:
            raise StreamExhausted(f'Bits [{self.position}, {self.position + count}) requested from a stream of {self.length} bits')
        word = 0
        for j in range(count):
            word |= self.raw_bit(self.position + j) << j
        if self.match:
            word ^= fingerprint_word(self.d, self.position, count) ^ ((1 << count) - 1)
        self.position += count
        return word

    def next(self) -> int:
        """Reads a single bit"""
        return self.read(1)

    def remaining(self) -> int:
        return self.length - self.position

    def __len__(self) -> int:
        return self.length

    def __iter__(self):
        return (self.bit(i) for i in range(self.length))


class VlBurr:
    """
    Variable-length bumped ribbon retrieval. `ribbons` is the maximum value
    length L, `total_bits` the number of stored bits B.
    """

    def __init__(self,
                 kind: StructureKind,
                 seed: int,
                 w: int,
                 bucket_size: int,
                 ribbons: int,
                 total_bits: int,
                 layers: list[BumpedLayer],
                 fallback: dict[int, int]):
        self.kind = kind
        self.seed = seed
        self.w = w
        self.bucket_size = bucket_size
        self.ribbons = ribbons
        self.total_bits = total_bits
        self.layers = layers
        self.fallback = fallback

    @classmethod
    def build(cls, pairs: Sequence[tuple[int, BitString]], cfg: BuildConfig = None) -> 'VlBurr':
        """
        Builds a variable-length static function

        :param pairs: Key digests with their values
        :param cfg: Build configuration
        :return: VlBurr whose stream for every constructed key starts with its value
        :raises DuplicateDigest: If a digest occurs twice
        """
        cfg = cfg or BuildConfig()
        digests = np.fromiter((d for d, _ in pairs), dtype=np.uint64, count=len(pairs))
        lengths = [v.length for _, v in pairs]
        values = [v.bits for _, v in pairs]
        ribbons = max(lengths, default=0)
        cares = [(1 << length) - 1 for length in lengths]

        build = build_layers(digests, lengths, cares, values, ribbons, cfg)
        fallback = {int(digests[i]): values[i] for i in build.fallback.tolist()}
        logger.debug(f'Built variable-length structure: {len(pairs)} keys, {sum(lengths)} bits, {ribbons} ribbons, {len(build.layers)} layers')
        return cls(StructureKind.VL_PLAIN, cfg.seed, cfg.w, cfg.bucket_size, ribbons, sum(lengths), build.layers, fallback)

    @classmethod
    def build_filter(cls, patterns: Sequence[tuple[int, BitPattern]], cfg: BuildConfig = None, f_max: int = None) -> 'VlBurr':
        """
        Builds the masked filter variant. ONE positions store fingerprint bits,
        ANY positions store nothing and decode to seeded noise.

        :param patterns: Key digests with their filter patterns
        :param cfg: Build configuration. Random fill is always enabled.
        :param f_max: Stream length, at least the longest pattern
        :return: VlBurr of kind VL_MASKED
        :raises DuplicateDigest: If a digest occurs twice
        """
        cfg = cfg or BuildConfig()
        if not cfg.random_fill:
            cfg = BuildConfig(seed=cfg.seed, w=cfg.w, bucket_size=cfg.bucket_size, overload=cfg.overload,
                              max_layers=cfg.max_layers, fallback_cap=cfg.fallback_cap, random_fill=True)

        digests = np.fromiter((d for d, _ in patterns), dtype=np.uint64, count=len(patterns))
        lengths = [p.length for _, p in patterns]
        cares = [p.ones for _, p in patterns]
        ribbons = max(lengths, default=0)
        if f_max is not None:
            if f_max < ribbons:
                raise ValueError(f'Stream length {f_max} is shorter than the longest pattern ({ribbons})')
            ribbons = f_max
        values = [fingerprint_word(d, 0, p.length) & p.ones for d, p in patterns]

        build = build_layers(digests, lengths, cares, values, ribbons, cfg)
        full = (1 << ribbons) - 1
        fallback = {}
        for i in build.fallback.tolist():
            d = int(digests[i])
            noise = fingerprint_word(rehash(d, cfg.seed), 0, ribbons)
            fallback[d] = (values[i] | (noise & ~cares[i])) & full
        stored = sum(p.stored_bits for _, p in patterns)
        logger.debug(f'Built filter structure: {len(patterns)} keys, {stored} stored bits, {ribbons} ribbons, {len(build.layers)} layers')
        return cls(StructureKind.VL_MASKED, cfg.seed, cfg.w, cfg.bucket_size, ribbons, stored, build.layers, fallback)

    def resolve(self, d: int) -> tuple[BumpedLayer, int, int, int] | int:
        """
        Finds where the bits of a digest live

        :param d: Key digest
        :return: (layer, start, coeffs, ribbon offset) or the raw fallback bits
        """
        for layer in self.layers:
            ld = rehash(d, layer.seed)
            parts = derive_parts(ld, layer.params)
            if not layer.bumps(parts.bucket, parts.offset):
                return layer, parts.start, parts.coeffs, ribbon_offset(ld, self.ribbons)
        return self.fallback.get(d, 0)

    def query_stream(self, d: int) -> BitStream:
        """Stream whose prefix is the value of a constructed key"""
        return BitStream(self, d)

    def query_filter_stream(self, d: int) -> BitStream:
        """Stream of match indicators: raw bit XNOR fingerprint bit"""
        return BitStream(self, d, match=True)

    def payload_bits(self) -> int:
        """Bits spent on solution vectors and serialized fallback entries (digest and value)"""
        entry = 64 + ((self.ribbons + 7) // 8) * 8
        return sum(layer.words.size * 64 for layer in self.layers) + entry * len(self.fallback)

    def metadata_bits(self) -> int:
        """Bits spent on bumping thresholds"""
        return sum(layer.thresholds.size * 16 for layer in self.layers)

    def write(self, writer: ByteWriter) -> None:
        """
        Appends the structure (without checksum trailer) to a writer

        :param writer: Target writer
        :return: None
        """
        writer.header(self.kind)
        writer.u64(self.seed)
        writer.u8(self.w)
        writer.u32(self.bucket_size)
        writer.u32(self.ribbons)
        writer.u64(self.total_bits)
        write_layers(writer, self.layers)
        entry = (self.ribbons + 7) // 8
        writer.u64(len(self.fallback))
        for d in sorted(self.fallback):
            writer.u64(d)
            writer.raw(self.fallback[d].to_bytes(entry, 'little'))

    @classmethod
    def read(cls, reader: ByteReader) -> 'VlBurr':
        """Inverse of `write`"""
        kind = reader.header((StructureKind.VL_PLAIN, StructureKind.VL_MASKED))
        seed = reader.u64()
        w = reader.u8()
        bucket_size = reader.u32()
        ribbons = reader.u32()
        total_bits = reader.u64()
        layers = read_layers(reader, seed, w, max(ribbons, 1))
        entry = (ribbons + 7) // 8
        fallback = {}
        for _ in range(reader.u64()):
            d = reader.u64()
            fallback[d] = int.from_bytes(reader.raw(entry), 'little')
        return cls(kind, seed, w, bucket_size, ribbons, total_bits, layers, fallback)

    def to_bytes(self) -> bytes:
        """Serializes the structure into a checksummed container"""
        writer = ByteWriter()
        self.write(writer)
        return writer.with_checksum()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'VlBurr':
        """Deserializes a checksummed container"""
        return cls.read(ByteReader(verify_checksum(data)))
