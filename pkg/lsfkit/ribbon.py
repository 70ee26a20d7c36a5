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

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .container import ByteReader, ByteWriter, verify_checksum
from .custom_types import BuildConfig, ConstructionFailed, DuplicateDigest, InsertResult, StructureKind
from .hashing import (
    RibbonParams,
    derive_parts,
    derive_parts_array,
    layer_seed,
    rehash,
    rehash_array,
    remix,
    ribbon_offset_array,
)

logger = logging.getLogger(__name__)


class RibbonSystem:
    """
    Incrementally solved GF(2) ribbon system with m columns and width w.

    Rows are stored at their pivot column, shifted so that bit 0 of the stored
    word is the pivot. A stored row at column j therefore spans [j, j + w).
    """

    def __init__(self, m: int, w: int):
        self.m = m
        self.w = w
        self.rows = [0] * m
        self.rhs = bytearray(m)
        self.last_pivot = -1

    def insert(self, start: int, coeffs: int, rhs: int) -> InsertResult:
        """
        Adds the equation <coeffs aligned at start> . Z = rhs

        :param start: Column of coefficient bit 0
        :param coeffs: w-bit coefficient word with bit 0 set
        :param rhs: Right-hand side bit
        :return: INSERTED (pivot in `last_pivot`), REDUNDANT or CONFLICT
        """
        assert 0 <= start <= self.m - self.w and coeffs & 1 and coeffs >> self.w == 0
        rows = self.rows
        while True:
            existing = rows[start]
            if existing == 0:
                rows[start] = coeffs
                self.rhs[start] = rhs
                self.last_pivot = start
                return InsertResult.INSERTED

            coeffs ^= existing
            rhs ^= self.rhs[start]
            if coeffs == 0:
                return InsertResult.REDUNDANT if rhs == 0 else InsertResult.CONFLICT

            shift = (coeffs & -coeffs).bit_length() - 1
            coeffs >>= shift
            start += shift

    def retract(self, pivot: int) -> None:
        """
        Removes the row stored at a pivot column. Only valid for the most
        recently inserted rows, in reverse insertion order.

        :param pivot: Pivot column of the row
        :return: None
        """
        self.rows[pivot] = 0
        self.rhs[pivot] = 0

    def back_substitute(self, fill_seed: int | None = None) -> np.ndarray:
        """
        Solves the system from the highest pivot column down to column 0. Free
        columns get bit 0, or a pseudo-random bit derived from `fill_seed`.

        :param fill_seed: Seed for free columns, None for zero fill
        :return: Solution vector as ceil(m / 64) little-endian uint64 words
        """
        words = math.ceil(self.m / 64)
        bits = bytearray(words * 64)
        mask = (1 << self.w) - 1
        window = 0
        rows = self.rows
        rhs = self.rhs
        for j in range(self.m - 1, -1, -1):
            row = rows[j]
            if row:
                bit = rhs[j] ^ (((row >> 1) & window).bit_count() & 1)
            elif fill_seed is not None:
                bit = remix(fill_seed, j) & 1
            else:
                bit = 0
            window = ((window << 1) | bit) & mask
            if bit:
                bits[j] = 1

        packed = np.packbits(np.frombuffer(bits, dtype=np.uint8), bitorder='little')
        return packed.view('<u8').astype(np.uint64)


def brute_force_solve_gf2(h: np.ndarray, f: Sequence[int]) -> np.ndarray | None:
    """
    Dense Gaussian elimination over GF(2), used as an oracle in tests

    :param h: n x m matrix of 0/1 entries
    :param f: Right-hand side of length n
    :return: Solution vector of length m (free variables set to 0) or None if unsolvable
    """
    h = np.asarray(h, dtype=np.uint8)
    n, m = h.shape
    assert n <= 256 and m <= 256 and len(f) == n

    # Rows as bitsets, rhs at bit m
    work = []
    for i in range(n):
        row = int(f[i]) << m
        for j in np.flatnonzero(h[i]):
            row |= 1 << int(j)
        work.append(row)

    pivots = []
    rank = 0
    for col in range(m):
        pivot = None
        for r in range(rank, n):
            if (work[r] >> col) & 1:
                pivot = r
                break
        if pivot is None:
            continue
        work[rank], work[pivot] = work[pivot], work[rank]
        for r in range(n):
            if r != rank and (work[r] >> col) & 1:
                work[r] ^= work[rank]
        pivots.append(col)
        rank += 1
        if rank == n:
            break

    column_mask = (1 << m) - 1
    for r in range(rank, n):
        if work[r] & column_mask == 0 and (work[r] >> m) & 1:
            return None

    z = np.zeros(m, dtype=np.uint8)
    for r, col in enumerate(pivots):
        z[col] = (work[r] >> m) & 1
    return z


@dataclass
class BumpedLayer:
    """
    One layer of a bumped ribbon structure. `words` holds the solution vectors
    of all ribbons interleaved: word j of ribbon i is at flat index j * L + i.
    """
    seed: int
    params: RibbonParams
    words: np.ndarray
    thresholds: np.ndarray

    def bumps(self, bucket: int, offset: int) -> bool:
        """Whether a key at the given bucket and offset was bumped from this layer"""
        return offset < self.thresholds.item(bucket)

    def window(self, ribbon: int, start: int) -> int:
        """
        Reads the w solution bits of a ribbon beginning at column `start`

        :param ribbon: Ribbon index
        :param start: First column
        :return: Window bits, column `start` at bit 0
        """
        ribbons = self.params.ribbons
        q, shift = divmod(start, 64)
        value = self.words.item(q * ribbons + ribbon) >> shift
        if shift + self.params.w > 64:
            value |= (self.words.item((q + 1) * ribbons + ribbon) << (64 - shift)) & 0xFFFF_FFFF_FFFF_FFFF
        return value


@dataclass
class LayeredBuild:
    """Result of `build_layers`"""
    layers: list[BumpedLayer]
    fallback: np.ndarray
    assignment: np.ndarray


def ribbon_loads(keys: Sequence[int], offsets: Sequence[int], lengths: Sequence[int], cares: Sequence[int], ribbons: int) -> list[int]:
    """
    Counts the equations each ribbon receives

    :param keys: Indices of the keys in this layer
    :param offsets: Ribbon offset b of each of these keys
    :param lengths: Number of bits per key, indexed by key
    :param cares: Bit mask of stored positions, indexed by key
    :param ribbons: Number of ribbons
    :return: Equation count per ribbon
    """
    loads = [0] * ribbons
    for idx, b in zip(keys, offsets):
        care = cares[idx]
        for j in range(lengths[idx]):
            if (care >> j) & 1:
                loads[(b + j) % ribbons] += 1
    return loads


def layer_bucket_size(natural: int, ribbons: int, cfg: BuildConfig) -> int:
    """
    Bucket size that minimizes the stored bits of a layer with `natural` slots
    per ribbon: the solution words of all ribbons plus one 16-bit threshold per
    bucket. Candidates are the configured size and its halvings, ties keep the
    larger bucket.

    :param natural: Slots per ribbon before rounding
    :param ribbons: Number of ribbons sharing the thresholds
    :param cfg: Build configuration
    :return: Bucket size in [1, cfg.bucket_size]
    """
    best, best_bits = cfg.bucket_size, None
    bucket = cfg.bucket_size
    while bucket >= 1:
        core = math.ceil(natural / bucket) * bucket
        bits = math.ceil((core + cfg.w - 1) / 64) * 64 * ribbons + 16 * (core // bucket)
        if best_bits is None or bits < best_bits:
            best, best_bits = bucket, bits
        bucket //= 2
    return best


def layer_size(loads: Sequence[int], cfg: BuildConfig) -> RibbonParams:
    """
    Chooses the shape of a layer from the number of equations per ribbon.
    The busiest ribbon determines the size of all ribbons.

    :param loads: Number of equations per ribbon
    :param cfg: Build configuration
    :return: Shape of the layer
    """
    natural = max(1, math.ceil(max(loads) / (1.0 + cfg.overload)))
    bucket = layer_bucket_size(natural, len(loads), cfg)
    core = math.ceil(natural / bucket) * bucket
    # Slots up to the end of the last solution word are stored anyway
    spare = -(core + cfg.w - 1) % 64
    core += (spare // bucket) * bucket
    return RibbonParams(m=core + cfg.w - 1, w=cfg.w, bucket_size=bucket, ribbons=len(loads))


def build_layers(digests: np.ndarray,
                 lengths: Sequence[int],
                 cares: Sequence[int],
                 values: Sequence[int],
                 ribbons: int,
                 cfg: BuildConfig) -> LayeredBuild:
    """
    Builds the layers of a bumped ribbon structure with `ribbons` interleaved
    ribbons sharing start positions and bumping thresholds. Bit j of key k is
    an equation in ribbon (b(k) + j) mod ribbons, inserted only where bit j of
    `cares[k]` is set. A conflict in any ribbon bumps the whole key.

    :param digests: uint64 key digests
    :param lengths: Number of bits per key
    :param cares: Bit mask of positions that carry an equation
    :param values: Right-hand side bits per key
    :param ribbons: Number of ribbons
    :param cfg: Build configuration
    :return: Layers, indices of keys left for the fallback map, and the layer each key ended up in
    """
    n = len(digests)
    if len(np.unique(digests)) != n:
        raise DuplicateDigest('Construction input contains duplicate key digests')

    assignment = np.full(n, -1, dtype=np.int64)
    if ribbons == 0:
        return LayeredBuild(layers=[], fallback=np.empty(0, dtype=np.int64), assignment=assignment)
    remaining = np.arange(n, dtype=np.int64)
    layers = []

    for layer_index in range(cfg.max_layers):
        if len(remaining) == 0:
            break

        seed = layer_seed(cfg.seed, layer_index)
        layer_digests = rehash_array(digests[remaining], seed)
        offsets_b = ribbon_offset_array(layer_digests, ribbons).tolist()

        loads = ribbon_loads(remaining.tolist(), offsets_b, lengths, cares, ribbons)
        params = layer_size(loads, cfg)
        logger.debug(f'Layer {layer_index}: {len(remaining)} keys, busiest ribbon holds {max(loads)} equations, m = {params.m}')

        start, coeffs, bucket, offset = derive_parts_array(layer_digests, params)
        order = np.lexsort((-offset, bucket))
        start, coeffs, bucket, offset = start.tolist(), coeffs.tolist(), bucket.tolist(), offset.tolist()
        keys = remaining.tolist()

        systems = [RibbonSystem(params.m, params.w) for _ in range(ribbons)]
        thresholds = np.zeros(params.bucket_count, dtype=np.uint16)
        bumped = []
        log = []

        order = order.tolist()
        group_begin = 0
        while group_begin < len(order):
            current = bucket[order[group_begin]]
            group_end = group_begin
            while group_end < len(order) and bucket[order[group_end]] == current:
                group_end += 1
            group = order[group_begin:group_end]
            group_begin = group_end

            log.clear()
            conflict_offset = None
            for pos in group:
                idx = keys[pos]
                care, value, b = cares[idx], values[idx], offsets_b[pos]
                for j in range(lengths[idx]):
                    if not (care >> j) & 1:
                        continue
                    ribbon = (b + j) % ribbons
                    result = systems[ribbon].insert(start[pos], coeffs[pos], (value >> j) & 1)
                    if result is InsertResult.INSERTED:
                        log.append((ribbon, systems[ribbon].last_pivot, offset[pos]))
                    elif result is InsertResult.CONFLICT:
                        conflict_offset = offset[pos]
                        break
                if conflict_offset is not None:
                    break

            if conflict_offset is not None:
                while log and log[-1][2] <= conflict_offset:
                    ribbon, pivot, _ = log.pop()
                    systems[ribbon].retract(pivot)
                thresholds[current] = conflict_offset + 1
                bumped.extend(pos for pos in group if offset[pos] <= conflict_offset)

        words = np.empty(math.ceil(params.m / 64) * ribbons, dtype=np.uint64)
        for ribbon, system in enumerate(systems):
            fill_seed = rehash(seed, ribbon) if cfg.random_fill else None
            words[ribbon::ribbons] = system.back_substitute(fill_seed)
        layers.append(BumpedLayer(seed=seed, params=params, words=words, thresholds=thresholds))

        bumped_mask = np.zeros(len(remaining), dtype=bool)
        bumped_mask[bumped] = True
        assignment[remaining[~bumped_mask]] = layer_index
        logger.debug(f'Layer {layer_index}: bumped {len(bumped)} of {len(remaining)} keys')
        remaining = remaining[bumped_mask]

    if len(remaining) > 0:
        logger.info(f'{len(remaining)} keys left after {len(layers)} layers go to the fallback map')
        if cfg.fallback_cap is not None and len(remaining) > cfg.fallback_cap:
            raise ConstructionFailed(f'Fallback map would hold {len(remaining)} entries, cap is {cfg.fallback_cap}')

    return LayeredBuild(layers=layers, fallback=remaining, assignment=assignment)


def resolve_layer(layers: Sequence[BumpedLayer], d: int) -> tuple[int, int, int, int] | None:
    """
    Finds the first layer that did not bump a key

    :param layers: Layers of the structure
    :param d: Key digest
    :return: Tuple (layer index, layer digest, start, coeffs) or None if every layer bumped the key
    """
    for index, layer in enumerate(layers):
        ld = rehash(d, layer.seed)
        parts = derive_parts(ld, layer.params)
        if not layer.bumps(parts.bucket, parts.offset):
            return index, ld, parts.start, parts.coeffs
    return None


def write_layers(writer: ByteWriter, layers: Sequence[BumpedLayer]) -> None:
    """Per layer: m, bucket size, thresholds, interleaved solution words"""
    writer.u8(len(layers))
    for layer in layers:
        writer.u64(layer.params.m)
        writer.u32(layer.params.bucket_size)
        writer.array(layer.thresholds, '<u2')
        writer.array(layer.words, '<u8')


def read_layers(reader: ByteReader, structure_seed: int, w: int, ribbons: int) -> list[BumpedLayer]:
    """Inverse of `write_layers`"""
    layers = []
    for layer_index in range(reader.u8()):
        m = reader.u64()
        params = RibbonParams(m=m, w=w, bucket_size=reader.u32(), ribbons=ribbons)
        thresholds = reader.array(params.bucket_count, '<u2')
        words = reader.array(math.ceil(params.m / 64) * ribbons, '<u8').astype(np.uint64)
        layers.append(BumpedLayer(seed=layer_seed(structure_seed, layer_index), params=params, words=words, thresholds=thresholds))
    return layers


class BurrSf:
    """
    1-bit bumped ribbon retrieval structure with an explicit fallback map
    """

    def __init__(self, seed: int, w: int, bucket_size: int, layers: list[BumpedLayer], fallback: dict[int, int]):
        self.seed = seed
        self.w = w
        self.bucket_size = bucket_size
        self.layers = layers
        self.fallback = fallback

    @classmethod
    def build(cls, pairs: Sequence[tuple[int, int]], cfg: BuildConfig = None) -> 'BurrSf':
        """
        Builds the structure for (digest, bit) pairs

        :param pairs: Key digests with their bits
        :param cfg: Build configuration
        :return: BurrSf answering every constructed digest with its bit
        :raises DuplicateDigest: If a digest occurs twice
        """
        cfg = cfg or BuildConfig()
        digests = np.fromiter((d for d, _ in pairs), dtype=np.uint64, count=len(pairs))
        bits = [bit & 1 for _, bit in pairs]
        build = build_layers(digests, [1] * len(bits), [1] * len(bits), bits, 1, cfg)
        fallback = {int(digests[i]): bits[i] for i in build.fallback.tolist()}
        logger.debug(f'Built 1-bit ribbon structure for {len(pairs)} keys with {len(build.layers)} layers')
        return cls(cfg.seed, cfg.w, cfg.bucket_size, build.layers, fallback)

    def query(self, d: int) -> int:
        """
        Retrieves the bit of a digest. Non-keys get an arbitrary bit.

        :param d: Key digest
        :return: Stored bit
        """
        for layer in self.layers:
            parts = derive_parts(rehash(d, layer.seed), layer.params)
            if layer.bumps(parts.bucket, parts.offset):
                continue
            return (parts.coeffs & layer.window(0, parts.start)).bit_count() & 1
        return self.fallback.get(d, 0)

    def payload_bits(self) -> int:
        """Bits spent on solution vectors and serialized fallback entries (digest and bit)"""
        return sum(layer.words.size * 64 for layer in self.layers) + (64 + 8) * len(self.fallback)

    def write(self, writer: ByteWriter) -> None:
        """
        Appends the structure (without checksum trailer) to a writer

        :param writer: Target writer
        :return: None
        """
        writer.header(StructureKind.BURR)
        writer.u64(self.seed)
        writer.u8(self.w)
        writer.u32(self.bucket_size)
        writer.u32(1)
        write_layers(writer, self.layers)
        writer.u64(len(self.fallback))
        for d in sorted(self.fallback):
            writer.u64(d)
            writer.u8(self.fallback[d])

    @classmethod
    def read(cls, reader: ByteReader) -> 'BurrSf':
        """Inverse of `write`"""
        reader.header(StructureKind.BURR)
        seed = reader.u64()
        w = reader.u8()
        bucket_size = reader.u32()
        reader.u32()
        layers = read_layers(reader, seed, w, 1)
        fallback = {}
        for _ in range(reader.u64()):
            d = reader.u64()
            fallback[d] = reader.u8()
        return cls(seed, w, bucket_size, layers, fallback)

    def to_bytes(self) -> bytes:
        """Serializes the structure into a checksummed container"""
        writer = ByteWriter()
        self.write(writer)
        return writer.with_checksum()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'BurrSf':
        """Deserializes a checksummed container"""
        return cls.read(ByteReader(verify_checksum(data)))
