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
Seeded derivation of all per-key randomness: key digests, ribbon start
positions, coefficient words, ribbon offsets and fingerprint bits.

The mixer is fixed (FNV-1a byte fold followed by a xor-shift-multiply
finalizer) so that serialized structures are portable across implementations.
"""

from dataclasses import dataclass
from typing import Iterable, NamedTuple, NewType

import numpy as np

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

SALT_START = 1
SALT_COEFFS = 2
SALT_RIBBON_OFFSET = 3
SALT_FINGERPRINT = 16
SALT_LAYER_SEED = 256

KeyDigest = NewType('KeyDigest', int)


def finalize(z: int) -> int:
    """
    Three-step xor-shift-multiply avalanche on a 64-bit word

    :param z: 64-bit input
    :return: Mixed 64-bit output
    """
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def fold(key_bytes: bytes) -> int:
    """
    64-bit FNV-1a fold over a byte sequence

    :param key_bytes: Key as opaque bytes
    :return: 64-bit fold value
    """
    h = FNV_OFFSET_BASIS
    for byte in key_bytes:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def digest(key_bytes: bytes, seed: int) -> KeyDigest:
    """
    Computes the 64-bit digest of a key under a seed

    :param key_bytes: Key as opaque bytes
    :param seed: 64-bit seed
    :return: Key digest
    """
    return KeyDigest(finalize(fold(key_bytes) ^ (seed & MASK64)))


def digest_many(keys: Iterable[bytes], seed: int) -> np.ndarray:
    """
    Digests a sequence of keys

    :param keys: Keys as opaque bytes
    :param seed: 64-bit seed
    :return: uint64 array of digests in input order
    """
    return np.fromiter((digest(k, seed) for k in keys), dtype=np.uint64)


def remix(d: int, salt: int) -> int:
    """
    Derives an independent 64-bit word from a digest and a salt

    :param d: Key digest
    :param salt: Derivation salt
    :return: Derived 64-bit word
    """
    return finalize(d ^ ((GOLDEN_GAMMA * salt) & MASK64))


def rehash(d: int, seed: int) -> int:
    """
    Re-keys a digest for a structure layer with its own seed

    :param d: Key digest
    :param seed: Layer seed
    :return: Layer digest
    """
    return finalize(d ^ (seed & MASK64))


def layer_seed(structure_seed: int, layer: int) -> int:
    """Seed of layer `layer` of a bumped structure"""
    return remix(structure_seed, SALT_LAYER_SEED + layer)


@dataclass(frozen=True)
class RibbonParams:
    """
    Shape of one ribbon layer. Starting positions range over [0, m - w], which
    is split into buckets of `bucket_size` consecutive positions.
    """
    m: int
    w: int = 64
    bucket_size: int = 512
    ribbons: int = 1

    def __post_init__(self):
        if not 1 <= self.w <= 64:
            raise ValueError(f'Ribbon width must be within [1, 64], got {self.w}')
        if self.m < self.w:
            raise ValueError(f'Slot count {self.m} is smaller than the ribbon width {self.w}')
        if self.m - self.w + 1 >= (1 << 32):
            raise ValueError(f'Slot count {self.m} exceeds the supported range')
        if self.bucket_size < 1 or self.start_range % self.bucket_size != 0:
            raise ValueError(f'Bucket size {self.bucket_size} does not divide the start range {self.start_range}')
        if self.ribbons < 1:
            raise ValueError(f'Ribbon count must be at least 1, got {self.ribbons}')

    @property
    def start_range(self) -> int:
        """Number of distinct starting positions"""
        return self.m - self.w + 1

    @property
    def bucket_count(self) -> int:
        """Number of buckets"""
        return self.start_range // self.bucket_size


class RibbonParts(NamedTuple):
    """Per-key ribbon row derived from a digest"""
    start: int
    coeffs: int
    bucket: int
    offset: int


def derive_parts(d: int, params: RibbonParams) -> RibbonParts:
    """
    Derives start position, coefficient word, bucket and intra-bucket offset

    :param d: (Layer) digest of the key
    :param params: Shape of the ribbon layer
    :return: RibbonParts of the key
    """
    start = (remix(d, SALT_START) * params.start_range) >> 64
    coeffs = (remix(d, SALT_COEFFS) & ((1 << params.w) - 1)) | 1
    bucket, offset = divmod(start, params.bucket_size)
    return RibbonParts(start, coeffs, bucket, offset)


def ribbon_offset(d: int, ribbons: int) -> int:
    """
    Index of the ribbon that stores the first bit of a key's value

    :param d: (Layer) digest of the key
    :param ribbons: Number of ribbons
    :return: Ribbon offset in [0, ribbons)
    """
    assert ribbons >= 1
    return remix(d, SALT_RIBBON_OFFSET) % ribbons


def fingerprint_bits(d: int, i: int) -> int:
    """
    Bit i of the lazily generated fingerprint sequence of a key

    :param d: Key digest
    :param i: Bit index
    :return: Fingerprint bit
    """
    assert i >= 0
    return (remix(d, SALT_FINGERPRINT + (i >> 6)) >> (i & 63)) & 1


def fingerprint_word(d: int, start: int, count: int) -> int:
    """
    Fingerprint bits [start, start + count) of a key, bit `start` at position 0

    :param d: Key digest
    :param start: First bit index
    :param count: Number of bits
    :return: Fingerprint bits as integer
    """
    word = 0
    produced = 0
    while produced < count:
        i = start + produced
        take = min(64 - (i & 63), count - produced)
        chunk = (remix(d, SALT_FINGERPRINT + (i >> 6)) >> (i & 63)) & ((1 << take) - 1)
        word |= chunk << produced
        produced += take
    return word


# v-- vectorized variants used during construction --v

def finalize_array(z: np.ndarray) -> np.ndarray:
    """Vectorized `finalize` over a uint64 array"""
    z = z.astype(np.uint64, copy=True)
    with np.errstate(over='ignore'):
        z ^= z >> np.uint64(30)
        z *= np.uint64(0xBF58476D1CE4E5B9)
        z ^= z >> np.uint64(27)
        z *= np.uint64(0x94D049BB133111EB)
        z ^= z >> np.uint64(31)
    return z


def remix_array(d: np.ndarray, salt: int) -> np.ndarray:
    """Vectorized `remix` over a uint64 array"""
    return finalize_array(d ^ np.uint64((GOLDEN_GAMMA * salt) & MASK64))


def rehash_array(d: np.ndarray, seed: int) -> np.ndarray:
    """Vectorized `rehash` over a uint64 array"""
    return finalize_array(d ^ np.uint64(seed & MASK64))


def derive_parts_array(d: np.ndarray, params: RibbonParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized `derive_parts`. The fixed-point range mapping is split into two
    32-bit halves so that no intermediate product exceeds 64 bits.

    :param d: uint64 array of layer digests
    :param params: Shape of the ribbon layer
    :return: Tuple of arrays (start, coeffs, bucket, offset)
    """
    x = remix_array(d, SALT_START)
    r = np.uint64(params.start_range)
    hi = x >> np.uint64(32)
    lo = x & np.uint64(0xFFFF_FFFF)
    with np.errstate(over='ignore'):
        start = (hi * r + ((lo * r) >> np.uint64(32))) >> np.uint64(32)
    coeffs = remix_array(d, SALT_COEFFS)
    if params.w < 64:
        coeffs &= np.uint64((1 << params.w) - 1)
    coeffs |= np.uint64(1)
    start = start.astype(np.int64)
    bucket, offset = np.divmod(start, params.bucket_size)
    return start, coeffs, bucket, offset


def ribbon_offset_array(d: np.ndarray, ribbons: int) -> np.ndarray:
    """Vectorized `ribbon_offset`"""
    return (remix_array(d, SALT_RIBBON_OFFSET) % np.uint64(ribbons)).astype(np.int64)
