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
Prefix codes over value indices and the implicit code-tree walk used by
learned static functions, plus the integer filter length optimizer.
"""

import heapq
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from itertools import accumulate
from typing import NamedTuple

import numpy as np

from .custom_types import AllZero, NotInner

P_FLOOR = 2.0 ** -32
"""Smallest probability any value can receive"""

MAX_CODE_LENGTH = 32
"""Longest Shannon codeword. Follows from P_FLOOR."""

MAX_FILTER_BITS = 64
"""Upper bound of the integer filter length search"""


def clamp_normalize(raw: np.ndarray) -> np.ndarray:
    """
    Turns non-negative weights into a distribution whose entries are all at
    least P_FLOOR. Works row-wise on 2D input.

    :param raw: Non-negative weights, shape (|V|,) or (n, |V|)
    :return: float64 distribution(s) of the same shape
    :raises AllZero: If a row has no positive entry
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)) or np.any(raw < 0):
        raise ValueError('Distribution weights must be finite and non-negative')
    rows = raw if raw.ndim == 2 else raw.reshape(1, -1)
    totals = row_sums(rows)
    if np.any(totals <= 0):
        raise AllZero('Distribution has no positive entry')

    dist = np.maximum(rows / totals, P_FLOOR)
    dist /= row_sums(dist)
    dist = np.maximum(dist, P_FLOOR)
    return dist if raw.ndim == 2 else dist.reshape(raw.shape)


def row_sums(rows: np.ndarray) -> np.ndarray:
    """
    Sums a 2D array along its rows, one column at a time. The result of a row
    does not depend on how many rows are processed together.

    :param rows: Array of shape (n, k)
    :return: Array of shape (n, 1)
    """
    total = rows[:, 0].copy()
    for c in range(1, rows.shape[1]):
        total += rows[:, c]
    return total[:, None]


def shannon_length(p: float, alphabet_size: int = 2) -> int:
    """
    ceil(-log2 p) taken from the binary exponent of p. With p = m * 2^e and
    m in [0.5, 1) this is always 1 - e.

    :param p: Probability in (0, 1]
    :param alphabet_size: Number of values. Lengths are at least 1 if greater than 1.
    :return: Shannon code length
    """
    assert 0.0 < p <= 1.0
    _, e = math.frexp(p)
    length = min(1 - e, MAX_CODE_LENGTH)
    if alphabet_size > 1:
        length = max(length, 1)
    return length


@dataclass(frozen=True)
class CodeBook:
    """
    Canonical prefix code. Leaves are ordered by (length, value index) which is
    also the order of the codewords read as binary fractions. Codewords are
    stored MSB first: the first bit of leaf i is bit lengths[i] - 1.
    """
    values: tuple[int, ...]
    probs: tuple[float, ...]
    lengths: tuple[int, ...]
    codewords: tuple[int, ...]
    longest: int = field(init=False, repr=False, compare=False)
    aligned: list[int] = field(init=False, repr=False, compare=False)
    cumulative: list[float] = field(init=False, repr=False, compare=False)

    @staticmethod
    def from_lengths(probs: np.ndarray, lengths: list[int]) -> 'CodeBook':
        """
        Assigns canonical codewords to given code lengths

        :param probs: Probability per value index
        :param lengths: Code length per value index
        :return: CodeBook in leaf order
        """
        order = sorted(range(len(lengths)), key=lambda v: (lengths[v], v))
        top = max(lengths, default=0)
        acc = 0
        codewords = []
        for v in order:
            codewords.append(acc >> (top - lengths[v]))
            acc += 1 << (top - lengths[v])
        assert acc <= 1 << top, 'Kraft inequality violated'
        return CodeBook(values=tuple(order),
                        probs=tuple(float(probs[v]) for v in order),
                        lengths=tuple(lengths[v] for v in order),
                        codewords=tuple(codewords))

    def __post_init__(self):
        top = max(self.lengths, default=0)
        object.__setattr__(self, 'longest', top)
        object.__setattr__(self, 'aligned', [c << (top - l) for c, l in zip(self.codewords, self.lengths)])
        object.__setattr__(self, 'cumulative', [0.0] + list(accumulate(self.probs)))
        object.__setattr__(self, '_leaf_of', {v: i for i, v in enumerate(self.values)})

    def __len__(self) -> int:
        return len(self.values)

    def leaf_of(self, value: int) -> int:
        """Leaf position of a value index"""
        return self._leaf_of[value]

    def codeword(self, value: int) -> str:
        """Codeword of a value as '0'/'1' string"""
        i = self._leaf_of[value]
        return format(self.codewords[i], f'0{self.lengths[i]}b') if self.lengths[i] else ''

    def mass(self, lo: int, hi: int) -> float:
        """Probability of leaves [lo, hi]"""
        return self.cumulative[hi + 1] - self.cumulative[lo]

    def expected_length(self) -> float:
        return sum(p * l for p, l in zip(self.probs, self.lengths))

    def kraft_sum(self) -> float:
        return sum(2.0 ** -l for l in self.lengths)

    def root(self) -> 'TreeCursor':
        return TreeCursor(depth=0, lo=0, hi=len(self.values) - 1, mass=1.0, prefix=0)


def shannon_assign(dist: np.ndarray) -> CodeBook:
    """
    Shannon code of a distribution. Codeword i is the leading l(p_i) bits of
    the binary fraction sum_{j < i} 2^-l(p_j) in leaf order.

    :param dist: Valid distribution over value indices
    :return: CodeBook
    """
    lengths = [shannon_length(float(p), len(dist)) for p in dist]
    return CodeBook.from_lengths(dist, lengths)


def huffman_assign(dist: np.ndarray) -> CodeBook:
    """
    Optimal prefix code of a distribution, canonicalized. Ties in the queue are
    broken by weight, then by the smallest value index in a subtree.

    :param dist: Valid distribution over value indices
    :return: CodeBook
    """
    lengths = [0] * len(dist)
    if len(dist) > 1:
        members = {v: [v] for v in range(len(dist))}
        heap = [(float(p), v) for v, p in enumerate(dist)]
        heapq.heapify(heap)
        while len(heap) > 1:
            w1, a = heapq.heappop(heap)
            w2, b = heapq.heappop(heap)
            for v in members[a] + members[b]:
                lengths[v] += 1
            merged = min(a, b)
            members[merged] = members.pop(a) + members.pop(b)
            heapq.heappush(heap, (w1 + w2, merged))
    return CodeBook.from_lengths(dist, lengths)


class TreeCursor(NamedTuple):
    """
    Node of the implicit code tree: all leaves in [lo, hi] share the first
    `depth` codeword bits `prefix`, `mass` is their probability.
    """
    depth: int
    lo: int
    hi: int
    mass: float
    prefix: int

    def is_leaf(self, book: CodeBook) -> bool:
        return self.lo == self.hi and book.lengths[self.lo] == self.depth


class Split(NamedTuple):
    """Outcome of `descend`. A child is None if no leaf lies on its side."""
    split: int
    p_left: float
    p_right: float
    left: TreeCursor | None
    right: TreeCursor | None

    @property
    def forced(self) -> bool:
        """Whether only one branch exists"""
        return self.left is None or self.right is None


def descend(cursor: TreeCursor, book: CodeBook) -> Split:
    """
    Splits an inner node into its 0-branch and 1-branch. The split leaf is
    found by binary search over the codewords aligned to the longest length.

    :param cursor: Inner node
    :param book: CodeBook the cursor walks
    :return: Split with branch probabilities and child cursors
    :raises NotInner: If the cursor is a leaf
    """
    if cursor.is_leaf(book) or cursor.lo > cursor.hi:
        raise NotInner(f'Cursor at depth {cursor.depth} over [{cursor.lo}, {cursor.hi}] is a leaf')

    top = book.longest
    threshold = ((cursor.prefix << 1) | 1) << (top - cursor.depth - 1)
    s = bisect_left(book.aligned, threshold, cursor.lo, cursor.hi + 1)
    depth = cursor.depth + 1

    if s == cursor.lo:
        right = TreeCursor(depth, cursor.lo, cursor.hi, cursor.mass, (cursor.prefix << 1) | 1)
        return Split(s, 0.0, 1.0, None, right)
    if s > cursor.hi:
        left = TreeCursor(depth, cursor.lo, cursor.hi, cursor.mass, cursor.prefix << 1)
        return Split(s, 1.0, 0.0, left, None)

    left_mass = book.mass(cursor.lo, s - 1)
    right_mass = cursor.mass - left_mass
    p_left = left_mass / cursor.mass
    left = TreeCursor(depth, cursor.lo, s - 1, left_mass, cursor.prefix << 1)
    right = TreeCursor(depth, s, cursor.hi, right_mass, (cursor.prefix << 1) | 1)
    return Split(s, p_left, 1.0 - p_left, left, right)


def space_cost(p: float, r: int) -> float:
    """
    Expected bits of a weighted filter of r bits plus one correction bit
    stored only on a filter miss

    :param p: Probability of the branch not covered by the filter
    :param r: Filter length
    :return: p * r + p + (1 - p) * 2^-r
    """
    return p * r + p + (1.0 - p) * 2.0 ** -r


def optimal_bit_length(p: float) -> int:
    """
    Integer filter length minimizing `space_cost`, ties toward smaller r.
    The cost is convex in r, so stepping while the next length is strictly
    cheaper finds the minimum.

    :param p: Probability in [0, 1/2]
    :return: Optimal filter length
    """
    if not 0.0 <= p <= 0.5:
        raise ValueError(f'Filter weight {p} outside of [0, 1/2]')
    r = 0
    while r < MAX_FILTER_BITS and (1.0 - p) * 2.0 ** -(r + 1) > p * (1.0 + 1e-12):
        r += 1
    return r


def optimal_bit_length_real(p: float) -> float:
    """Real-valued minimizer of `space_cost`, floored at 0"""
    if p <= 0.0:
        return math.inf
    return max(0.0, math.log2((1.0 - p) * math.log(2.0) / p))


def binary_entropy(p: float) -> float:
    """
    Binary entropy in bits

    :param p: Probability in [0, 1]
    :return: H(p), with H(0) = H(1) = 0
    """
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
