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
Learned static functions: a probability model, a masked variable-length
filter and a plain variable-length correction structure.

Every key walks the code tree of its predicted distribution. At each binary
decision with branch probabilities (p, 1 - p) a weighted filter of
r = optimal_bit_length(min(p, 1 - p)) bits tells whether the less probable
branch may have been taken; only then a correction bit is consulted.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from time import perf_counter

import numpy as np

from .coding import CodeBook, TreeCursor, descend, huffman_assign, optimal_bit_length, shannon_assign
from .container import ByteReader, ByteWriter, verify_checksum
from .custom_types import (
    BuildConfig,
    DuplicateKey,
    LsfConfig,
    LsfMode,
    StructureKind,
    WeightOutOfRange,
)
from .hashing import digest, remix
from .models import FreqModel, ProbabilityModel, Scaler, read_model
from .ribbon import BurrSf
from .vlsf import BitPattern, BitStream, BitString, VlBurr

logger = logging.getLogger(__name__)

SALT_FILTER_SEED = 1
SALT_CORRECTION_SEED = 2


def decision_plan(p_left: float, p_right: float) -> tuple[int, int]:
    """
    Filter length and more probable branch of a binary decision

    :param p_left: Probability of the 0-branch
    :param p_right: Probability of the 1-branch
    :return: Tuple (r, more probable bit). A tie counts 0 as more probable.
    """
    return optimal_bit_length(min(p_left, p_right)), 1 if p_right > 0.5 else 0


def read_match(stream: BitStream, r: int) -> bool:
    """
    Reads r filter match bits. A stream too short for the read counts as a miss.

    :param stream: Filter match stream
    :param r: Number of bits
    :return: True if all r bits matched
    """
    if stream.remaining() < r:
        return False
    return stream.read(r) == (1 << r) - 1


class Wrm:
    """
    Weighted relative membership: answers x in M exactly for every x in X
    given per-key weights p(x) in [0, 1/2]
    """

    def __init__(self, filter_vl: VlBurr, correction: BurrSf):
        self.filter = filter_vl
        self.correction = correction

    @staticmethod
    def weight_bits(p: float) -> int:
        """
        Filter length of a key

        :param p: Weight in [0, 1/2]
        :return: r(x)
        :raises WeightOutOfRange: If p lies outside of [0, 1/2]
        """
        if not 0.0 <= p <= 0.5:
            raise WeightOutOfRange(f'Weight {p} outside of [0, 1/2]')
        return optimal_bit_length(p)

    @classmethod
    def build(cls, digests: list[int], members: list[bool], weights: list[float], seed: int = 0) -> 'Wrm':
        """
        Builds the weighted filter over M, then the correction structure over
        all filter positives in X

        :param digests: Key digests of X
        :param members: Whether each key is in M
        :param weights: p(x) of each key
        :param seed: Master seed
        :return: Wrm
        """
        rs = [cls.weight_bits(p) for p in weights]
        patterns = [(d, BitPattern(r, (1 << r) - 1)) for d, r, member in zip(digests, rs, members) if member]
        filter_cfg = BuildConfig(seed=remix(seed, SALT_FILTER_SEED), random_fill=True)
        filter_vl = VlBurr.build_filter(patterns, filter_cfg, f_max=max(rs, default=0))

        pairs = []
        false_positives = 0
        for d, r, member in zip(digests, rs, members):
            if member:
                pairs.append((d, 1))
            elif read_match(filter_vl.query_filter_stream(d), r):
                pairs.append((d, 0))
                false_positives += 1
        correction = BurrSf.build(pairs, BuildConfig(seed=remix(seed, SALT_CORRECTION_SEED)))
        logger.info(f'Built WRM over {len(digests)} keys: {len(patterns)} members, {false_positives} filter false positives')
        return cls(filter_vl, correction)

    def filter_matches(self, d: int, p: float) -> bool:
        """Whether the weighted filter reports a key of weight p"""
        return read_match(self.filter.query_filter_stream(d), self.weight_bits(p))

    def query(self, d: int, p: float) -> int:
        """
        Membership bit of a key in X

        :param d: Key digest
        :param p: Weight the key was built with
        :return: 1 if the key is in M
        """
        return self.correction.query(d) if self.filter_matches(d, p) else 0

    def payload_bits(self) -> int:
        return self.filter.payload_bits() + self.correction.payload_bits()

    def size_bits(self) -> int:
        return 8 * (len(self.filter.to_bytes()) + len(self.correction.to_bytes()))


@dataclass
class QueryStats:
    """
    Counters filled by instrumented queries. Batch queries also split their
    time between model inference and walking the structures.
    """
    queries: int = 0
    fast_path: int = 0
    codebooks_built: int = 0
    inference_seconds: float = 0.0
    walk_seconds: float = 0.0

    def merge(self, other: 'QueryStats') -> None:
        """Adds the counters of another instance, e.g. from a second thread"""
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))


@dataclass
class SpaceLedger:
    """
    Exact bit accounting of a serialized structure. sigma_bits is the ideal
    cost (surprisal plus model), the remaining fields split the real one.
    """
    n: int
    model_bits: int
    filter_payload_bits: int
    correction_payload_bits: int
    metadata_bits: int
    surprisal_bits: float

    @property
    def total_bits(self) -> int:
        return self.model_bits + self.filter_payload_bits + self.correction_payload_bits + self.metadata_bits

    @property
    def sigma_bits(self) -> float:
        return self.surprisal_bits + self.model_bits

    @property
    def overhead_defined(self) -> bool:
        return self.surprisal_bits > 0

    @property
    def overhead_ratio(self) -> float:
        """(total - model) / surprisal, NaN if the surprisal is 0"""
        if not self.overhead_defined:
            return math.nan
        return (self.total_bits - self.model_bits) / self.surprisal_bits

    def per_key(self, bits: float) -> float:
        return bits / self.n if self.n else math.nan

    def to_json(self) -> dict:
        data = asdict(self)
        data.update({
            'total_bits': self.total_bits,
            'sigma_bits': self.sigma_bits,
            'overhead_ratio': self.overhead_ratio,
            'overhead_defined': self.overhead_defined,
            'bits_per_key': self.per_key(self.total_bits),
            'model_bits_per_key': self.per_key(self.model_bits),
            'filter_bits_per_key': self.per_key(self.filter_payload_bits),
            'correction_bits_per_key': self.per_key(self.correction_payload_bits),
            'metadata_bits_per_key': self.per_key(self.metadata_bits),
            'payload_bits_per_key': self.per_key(self.filter_payload_bits + self.correction_payload_bits),
            'surprisal_per_key': self.per_key(self.surprisal_bits),
            'sigma_per_key': self.per_key(self.sigma_bits),
        })
        return data


class Lsf:
    """
    Learned static function mapping keys to value indices
    """

    def __init__(self,
                 mode: LsfMode,
                 seed: int,
                 n: int,
                 model: ProbabilityModel,
                 value_names: list[str],
                 filter_vl: VlBurr,
                 correction_vl: VlBurr,
                 surprisal_bits: float,
                 scaler: Scaler = None,
                 code_lengths: list[int] = None):
        self.mode = mode
        self.seed = seed
        self.n = n
        self.model = model
        self.value_names = value_names
        self.filter = filter_vl
        self.correction = correction_vl
        self.surprisal_bits = surprisal_bits
        self.scaler = scaler
        self.code_lengths = code_lengths
        self.global_book = None
        if mode == LsfMode.CSF:
            dist = self._global_distribution()
            self.global_book = CodeBook.from_lengths(dist, code_lengths) if code_lengths is not None else huffman_assign(dist)
            self.code_lengths = [self.global_book.lengths[self.global_book.leaf_of(v)] for v in range(len(dist))]

    @property
    def classes(self) -> int:
        return len(self.value_names)

    @property
    def f_max(self) -> int:
        return self.filter.ribbons

    @property
    def c_max(self) -> int:
        return self.correction.ribbons

    def _global_distribution(self) -> np.ndarray:
        return self.model.predict_proba(np.zeros((1, self.model.dim)))[0]

    @classmethod
    def build(cls,
              keys: list[bytes],
              features: np.ndarray,
              labels: np.ndarray,
              model: ProbabilityModel,
              value_names: list[str] = None,
              cfg: LsfConfig = None,
              scaler: Scaler = None) -> 'Lsf':
        """
        Two-pass construction. Pass 1 derives every key's code path and its
        filter pattern, pass 2 reads the built filter and collects the
        correction bits of all filter matches.

        :param keys: Distinct keys
        :param features: Feature matrix, one row per key
        :param labels: Value index per key
        :param model: Fitted probability model
        :param value_names: Original value of every value index
        :param cfg: Construction parameters
        :param scaler: Preprocessing parameters stored alongside the model
        :return: Lsf answering every key with its label
        :raises DuplicateKey: If a key occurs twice
        :raises DimensionMismatch: If the model does not fit the features
        """
        cfg = cfg or LsfConfig()
        if cfg.randomized_rounding:
            raise NotImplementedError('Randomized rounding of filter weights is not supported')
        if len(set(keys)) != len(keys):
            raise DuplicateKey('Construction input contains duplicate keys')
        labels = np.asarray(labels, dtype=np.int64)
        value_names = value_names if value_names is not None else [str(v) for v in range(model.classes)]
        if len(value_names) != model.classes:
            raise ValueError(f'Model predicts {model.classes} values but {len(value_names)} value names were given')

        digests = [digest(k, cfg.seed) for k in keys]
        global_book = None
        if cfg.mode == LsfMode.CSF:
            global_book = huffman_assign(model.predict_proba(np.zeros((1, model.dim)))[0])

        # Pass 1: code paths and filter patterns
        patterns = []
        plans = []
        surprisal_bits = 0.0
        for offset, probs in model.predict_chunked(np.asarray(features, dtype=np.float64), cfg.predict_chunk_size):
            for i, dist in enumerate(probs):
                label = int(labels[offset + i])
                surprisal_bits -= math.log2(dist[label])
                book = global_book if global_book is not None else shannon_assign(dist)
                length, ones, plan = 0, 0, []
                for p_left, p_right, c in path_decisions(book, label):
                    r, likely = decision_plan(p_left, p_right)
                    if c != likely:
                        ones |= ((1 << r) - 1) << length
                    length += r
                    plan.append((r, c))
                patterns.append((digests[offset + i], BitPattern(length, ones)))
                plans.append(plan)

        filter_vl = VlBurr.build_filter(patterns, cfg.structure_config(remix(cfg.seed, SALT_FILTER_SEED), True))
        logger.info(f'Filter: {filter_vl.total_bits} stored bits, F_max = {filter_vl.ribbons}, {len(filter_vl.fallback)} fallback entries')

        # Pass 2: correction bits wherever the built filter matches
        corrections = []
        for d, plan in zip(digests, plans):
            stream = filter_vl.query_filter_stream(d)
            bits, length = 0, 0
            for r, c in plan:
                if read_match(stream, r):
                    bits |= c << length
                    length += 1
            corrections.append((d, BitString(length, bits)))

        correction_vl = VlBurr.build(corrections, cfg.structure_config(remix(cfg.seed, SALT_CORRECTION_SEED), False))
        logger.info(f'Correction: {correction_vl.total_bits} stored bits, C_max = {correction_vl.ribbons}, {len(correction_vl.fallback)} fallback entries')

        if filter_vl.fallback or correction_vl.fallback:
            logger.warning(f'{len(filter_vl.fallback) + len(correction_vl.fallback)} keys are stored in fallback maps')

        return cls(cfg.mode, cfg.seed, len(keys), model, list(value_names), filter_vl, correction_vl, surprisal_bits,
                   scaler=scaler, code_lengths=None)

    @classmethod
    def build_csf(cls, keys: list[bytes], labels: np.ndarray, classes: int, value_names: list[str] = None, cfg: LsfConfig = None) -> 'Lsf':
        """
        Compressed static function: value frequencies as model and one global
        Huffman code shared by all keys

        :param keys: Distinct keys
        :param labels: Value index per key
        :param classes: Number of values
        :param value_names: Original value of every value index
        :param cfg: Construction parameters, the mode is forced to CSF
        :return: Lsf in CSF mode
        """
        cfg = cfg or LsfConfig()
        cfg = LsfConfig(seed=cfg.seed, mode=LsfMode.CSF, randomized_rounding=cfg.randomized_rounding,
                        predict_chunk_size=cfg.predict_chunk_size, force_slow_path=cfg.force_slow_path)
        labels = np.asarray(labels, dtype=np.int64)
        model = FreqModel.fit(labels, classes)
        return cls.build(keys, np.zeros((len(keys), 0)), labels, model, value_names, cfg)

    def query(self, key: bytes, features: np.ndarray = None, stats: QueryStats = None, force_slow: bool = False) -> int:
        """
        Value index of a key. Keys outside the construction set get an
        arbitrary value.

        :param key: Key bytes
        :param features: Feature vector of the key, not needed in CSF mode
        :param stats: Optional counters
        :param force_slow: Always build the code book
        :return: Value index
        """
        if self.mode == LsfMode.CSF:
            return self._walk(digest(key, self.seed), None, stats, force_slow)
        dist = self.model.predict(np.asarray(features, dtype=np.float64))
        return self._walk(digest(key, self.seed), dist, stats, force_slow)

    def query_many(self, keys: list[bytes], features: np.ndarray = None, stats: QueryStats = None, force_slow: bool = False) -> np.ndarray:
        """
        Value indices of many keys, predicting the model in batches

        :param keys: Keys
        :param features: Feature matrix, one row per key
        :param stats: Optional counters
        :param force_slow: Always build the code book
        :return: int64 array of value indices
        """
        out = np.empty(len(keys), dtype=np.int64)
        if self.mode == LsfMode.CSF:
            started = perf_counter()
            for i, key in enumerate(keys):
                out[i] = self._walk(digest(key, self.seed), None, stats, force_slow)
            if stats is not None:
                stats.walk_seconds += perf_counter() - started
            return out

        chunks = self.model.predict_chunked(np.asarray(features, dtype=np.float64))
        while True:
            started = perf_counter()
            chunk = next(chunks, None)
            predicted = perf_counter()
            if chunk is None:
                break
            offset, probs = chunk
            for i, dist in enumerate(probs):
                out[offset + i] = self._walk(digest(keys[offset + i], self.seed), dist, stats, force_slow)
            if stats is not None:
                stats.inference_seconds += predicted - started
                stats.walk_seconds += perf_counter() - predicted
        return out

    def query_value(self, key: bytes, features: np.ndarray = None) -> str:
        """Original value of a key"""
        return self.value_names[self.query(key, features)]

    def _walk(self, d: int, dist: np.ndarray | None, stats: QueryStats | None, force_slow: bool) -> int:
        if stats is not None:
            stats.queries += 1
        if self.classes <= 1:
            return 0

        filter_stream = self.filter.query_filter_stream(d)
        correction_stream = self.correction.query_stream(d)

        def decide(p_left: float, p_right: float) -> int:
            r, likely = decision_plan(p_left, p_right)
            if read_match(filter_stream, r):
                return correction_stream.next() if correction_stream.remaining() else likely
            return likely

        if self.global_book is not None:
            book = self.global_book
            cursor = book.root()
        else:
            top = int(np.argmax(dist))
            if not force_slow and dist[top] > 0.5:
                # The most probable value owns the whole 0-branch of the root
                p_left = float(dist[top]) / 1.0
                if decide(p_left, 1.0 - p_left) == 0:
                    if stats is not None:
                        stats.fast_path += 1
                    return top
                book = shannon_assign(dist)
                if stats is not None:
                    stats.codebooks_built += 1
                cursor = descend(book.root(), book).right
            else:
                book = shannon_assign(dist)
                if stats is not None:
                    stats.codebooks_built += 1
                cursor = book.root()

        while not cursor.is_leaf(book):
            split = descend(cursor, book)
            if split.forced:
                cursor = split.left if split.right is None else split.right
                continue
            cursor = split.right if decide(split.p_left, split.p_right) else split.left
        return book.values[cursor.lo]

    def ledger(self) -> SpaceLedger:
        """
        Exact space accounting of the serialized structure

        :return: SpaceLedger
        """
        total_bits = len(self.to_bytes()) * 8
        model_bits = self.model.encoded_bits()
        filter_bits = self.filter.payload_bits()
        correction_bits = self.correction.payload_bits()
        return SpaceLedger(n=self.n,
                           model_bits=model_bits,
                           filter_payload_bits=filter_bits,
                           correction_payload_bits=correction_bits,
                           metadata_bits=total_bits - model_bits - filter_bits - correction_bits,
                           surprisal_bits=self.surprisal_bits)

    def to_bytes(self) -> bytes:
        """
        Serializes the structure into a checksummed container

        :return: Container bytes
        """
        writer = ByteWriter()
        writer.header(StructureKind.LSF)
        writer.u8(self.mode)
        writer.u64(self.seed)
        writer.u64(self.n)
        writer.u32(self.classes)
        writer.f64(self.surprisal_bits)
        writer.u32(self.f_max)
        writer.u32(self.c_max)

        model_writer = ByteWriter()
        self.model.write(model_writer)
        writer.blob(bytes(model_writer.buffer))
        writer.blob(json.dumps(self.scaler.to_json()).encode() if self.scaler else b'')
        for name in self.value_names:
            writer.blob(name.encode())
        if self.mode == LsfMode.CSF:
            writer.array(np.asarray(self.code_lengths), '<u1')

        for structure in (self.filter, self.correction):
            inner = ByteWriter()
            structure.write(inner)
            writer.blob(bytes(inner.buffer))
        return writer.with_checksum()

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Lsf':
        """
        Deserializes a checksummed container

        :param data: Container bytes
        :return: Lsf
        :raises ContainerError: If the container is damaged or incompatible
        """
        reader = ByteReader(verify_checksum(data))
        reader.header(StructureKind.LSF)
        mode = LsfMode(reader.u8())
        seed = reader.u64()
        n = reader.u64()
        classes = reader.u32()
        surprisal_bits = reader.f64()
        reader.u32()
        reader.u32()

        model = read_model(ByteReader(reader.blob()))
        scaler_json = reader.blob()
        scaler = Scaler.from_json(json.loads(scaler_json)) if scaler_json else None
        value_names = [reader.blob().decode() for _ in range(classes)]
        code_lengths = reader.array(classes, '<u1').tolist() if mode == LsfMode.CSF else None

        filter_vl = VlBurr.read(ByteReader(reader.blob()))
        correction_vl = VlBurr.read(ByteReader(reader.blob()))
        return cls(mode, seed, n, model, value_names, filter_vl, correction_vl, surprisal_bits,
                   scaler=scaler, code_lengths=code_lengths)

    def save(self, path: str) -> None:
        with open(path, 'wb') as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path: str) -> 'Lsf':
        with open(path, 'rb') as f:
            return cls.from_bytes(f.read())


def path_decisions(book: CodeBook, value: int):
    """
    Yields (p_left, p_right, taken bit) for every non-forced node on the
    path from the root to a value's leaf

    :param book: CodeBook
    :param value: Value index
    """
    leaf = book.leaf_of(value)
    length, code = book.lengths[leaf], book.codewords[leaf]
    cursor: TreeCursor = book.root()
    for depth in range(length):
        c = (code >> (length - 1 - depth)) & 1
        split = descend(cursor, book)
        cursor = split.right if c else split.left
        if not split.forced:
            yield split.p_left, split.p_right, c


def ledger(lsf: Lsf) -> SpaceLedger:
    """Space accounting of a built structure"""
    return lsf.ledger()
