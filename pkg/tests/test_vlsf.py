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
import numpy as np
import pytest

from lsfkit.custom_types import BuildConfig, ChecksumMismatch, DuplicateDigest, StreamExhausted, StructureKind, Symbol
from lsfkit.vlsf import BitPattern, BitString, VlBurr
from .conftest import TestUtils


def random_values(n: int, max_length: int, seed: int) -> list[BitString]:
    rng = np.random.default_rng(seed)
    values = []
    for length in rng.integers(1, max_length + 1, size=n).tolist():
        values.append(BitString(length, int(rng.integers(0, 1 << length))))
    return values


class TestBitTypes:
    """
    Tests for bit strings and filter patterns
    """

    def test_bitstring_from_str(self) -> None:
        """
        Tests that the first character is bit 0

        :return: None
        """
        value = BitString.from_str('110')
        assert value.length == 3
        assert value.bits == 0b011
        assert [value[i] for i in range(3)] == [1, 1, 0]
        assert str(value) == '110'

    def test_bitstring_invalid(self) -> None:
        """
        Tests rejected bit strings

        :return: None
        """
        with pytest.raises(ValueError):
            BitString.from_str('10x')
        with pytest.raises(ValueError):
            BitString(2, 0b111)
        with pytest.raises(IndexError):
            BitString.from_str('1')[1]

    def test_pattern(self) -> None:
        """
        Tests parsing and symbol access of filter patterns

        :return: None
        """
        pattern = BitPattern.from_str('1?1?')
        assert pattern.stored_bits == 2
        assert pattern[0] == Symbol.ONE
        assert pattern[1] == Symbol.ANY
        assert str(pattern) == '1?1?'
        assert BitPattern.from_symbols([Symbol.ONE, Symbol.ANY, Symbol.ONE, Symbol.ANY]) == pattern
        with pytest.raises(ValueError):
            BitPattern.from_str('10')


class TestVlBurr:
    """
    Tests for the variable-length static function
    """

    def test_single_bit_values(self) -> None:
        """
        Tests two 1-bit values

        :return: None
        """
        vl = VlBurr.build([(11, BitString.from_str('0')), (22, BitString.from_str('1'))])
        assert vl.ribbons == 1
        assert vl.query_stream(11).bit(0) == 0
        assert vl.query_stream(22).bit(0) == 1

    def test_ribbon_count_is_max_length(self) -> None:
        """
        Tests that L is the longest value length

        :return: None
        """
        pairs = [(1, BitString.from_str('1')), (2, BitString.from_str('010')), (3, BitString.from_str('111000'))]
        vl = VlBurr.build(pairs)
        assert vl.ribbons == 6
        assert vl.total_bits == 10

    def test_prefix(self) -> None:
        """
        Tests that the stream of a key starts with its value and reads
        are repeatable

        :return: None
        """
        pairs = [(d, v) for d, v in zip(TestUtils.random_digests(50, seed=4).tolist(), random_values(50, 5, 4))]
        pairs.append((777, BitString.from_str('101')))
        vl = VlBurr.build(pairs, BuildConfig(seed=4))
        stream = vl.query_stream(777)
        assert [stream.next() for _ in range(3)] == [1, 0, 1]
        assert list(vl.query_stream(777)) == list(vl.query_stream(777))

    @pytest.mark.parametrize("max_length", [1, 4, 8])
    def test_roundtrip(self, max_length) -> None:
        """
        Tests that every constructed key reads back its value

        :param max_length: Longest value length
        :return: None
        """
        n = 4000
        values = random_values(n, max_length, max_length)
        digests = TestUtils.random_digests(n, seed=max_length).tolist()
        vl = VlBurr.build(list(zip(digests, values)), BuildConfig(seed=max_length))
        for d, v in zip(digests, values):
            assert vl.query_stream(d).read(v.length) == v.bits

    @pytest.mark.slow
    @pytest.mark.timeout(900)
    def test_roundtrip_large_and_size(self) -> None:
        """
        Tests exactness and space at n = 10^5 with lengths uniform in 1..8

        :return: None
        """
        n = 100_000
        values = random_values(n, 8, 17)
        digests = TestUtils.random_digests(n, seed=17).tolist()
        vl = VlBurr.build(list(zip(digests, values)), BuildConfig(seed=17))
        assert all(vl.query_stream(d).read(v.length) == v.bits for d, v in zip(digests, values))
        assert vl.payload_bits() <= 1.15 * vl.total_bits

    def test_non_key(self) -> None:
        """
        Tests that a non-key yields L bits without error

        :return: None
        """
        pairs = list(zip(TestUtils.random_digests(100).tolist(), random_values(100, 3, 0)))
        vl = VlBurr.build(pairs)
        stream = vl.query_stream(0xDEAD_BEEF)
        assert len(list(stream)) == vl.ribbons
        assert stream.read(vl.ribbons) >= 0

    def test_stream_exhausted(self) -> None:
        """
        Tests reads past the last bit

        :return: None
        """
        vl = VlBurr.build([(5, BitString.from_str('10'))])
        stream = vl.query_stream(5)
        stream.read(2)
        assert stream.remaining() == 0
        with pytest.raises(StreamExhausted):
            stream.next()
        with pytest.raises(StreamExhausted):
            vl.query_stream(5).bit(2)

    def test_empty_values(self) -> None:
        """
        Tests a structure where every value is empty

        :return: None
        """
        vl = VlBurr.build([(1, BitString(0)), (2, BitString(0))])
        assert vl.ribbons == 0
        assert vl.layers == []
        stream = vl.query_stream(1)
        assert stream.read(0) == 0
        with pytest.raises(StreamExhausted):
            stream.next()

    def test_duplicate_digest(self) -> None:
        """
        Tests that duplicate digests are rejected

        :return: None
        """
        with pytest.raises(DuplicateDigest):
            VlBurr.build([(9, BitString.from_str('1')), (9, BitString.from_str('0'))])

    def test_fallback_values(self) -> None:
        """
        Tests values served from the fallback map

        :return: None
        """
        pairs = list(zip(TestUtils.random_digests(30, seed=6).tolist(), random_values(30, 6, 6)))
        vl = VlBurr.build(pairs, BuildConfig(max_layers=0))
        assert len(vl.fallback) == 30
        assert all(vl.query_stream(d).read(v.length) == v.bits for d, v in pairs)


    def test_fallback_payload_matches_container(self) -> None:
        """
        Tests that fallback entries are accounted as digest plus whole value bytes

        :return: None
        """
        values = [BitString(12, 0xABC)] + random_values(29, 12, 7)
        pairs = list(zip(TestUtils.random_digests(30, seed=7).tolist(), values))
        small = VlBurr.build(pairs[:20], BuildConfig(max_layers=0))
        large = VlBurr.build(pairs, BuildConfig(max_layers=0))
        assert small.ribbons == large.ribbons == 12

        assert large.payload_bits() == (64 + 16) * 30
        assert (len(large.to_bytes()) - len(small.to_bytes())) * 8 == large.payload_bits() - small.payload_bits()


class TestFilterVlBurr:
    """
    Tests for the masked filter variant
    """

    def test_stored_positions_match(self) -> None:
        """
        Tests that ONE positions of every pattern read as matches

        :return: None
        """
        rng = np.random.default_rng(3)
        digests = TestUtils.random_digests(2000, seed=3).tolist()
        patterns = [BitPattern(6, int(rng.integers(0, 64))) for _ in digests]
        vl = VlBurr.build_filter(list(zip(digests, patterns)), BuildConfig(seed=3))
        assert vl.kind == StructureKind.VL_MASKED
        assert vl.total_bits == sum(p.stored_bits for p in patterns)
        for d, p in zip(digests, patterns):
            stream = vl.query_filter_stream(d)
            assert all(stream.bit(i) == 1 for i in range(6) if p[i] == Symbol.ONE)

    def test_all_ones_read(self) -> None:
        """
        Tests that reading r stored bits yields the all-ones word and an
        empty read is a vacuous match

        :return: None
        """
        vl = VlBurr.build_filter([(42, BitPattern.from_str('111')), (43, BitPattern.from_str('1'))])
        assert vl.query_filter_stream(42).read(3) == 0b111
        assert vl.query_filter_stream(43).read(1) == 1
        assert vl.query_filter_stream(43).read(0) == 0

    def test_any_positions_are_uniform(self) -> None:
        """
        Tests that unstored positions read as fair coin flips

        :return: None
        """
        n = 10_000
        digests = TestUtils.random_digests(n, seed=12).tolist()
        vl = VlBurr.build_filter([(d, BitPattern.from_str('??')) for d in digests], BuildConfig(seed=12))
        ones = sum(vl.query_filter_stream(d).bit(0) for d in digests)
        assert abs(ones / n - 0.5) <= TestUtils.binomial_tolerance(n, 0.5, sigmas=4.0)

    @pytest.mark.parametrize("r", [1, 2, 4])
    def test_false_match_rate(self, r) -> None:
        """
        Tests that non-keys match an r-bit window with probability 2^-r

        :param r: Window length
        :return: None
        """
        digests = TestUtils.random_digests(23_000, seed=r).tolist()
        keys, others = digests[:3000], digests[3000:]
        vl = VlBurr.build_filter([(d, BitPattern(r, (1 << r) - 1)) for d in keys], BuildConfig(seed=r))
        assert all(vl.query_filter_stream(d).read(r) == (1 << r) - 1 for d in keys)
        hits = sum(vl.query_filter_stream(d).read(r) == (1 << r) - 1 for d in others)
        p = 2.0 ** -r
        assert abs(hits / len(others) - p) <= TestUtils.binomial_tolerance(len(others), p, sigmas=4.0)

    def test_stream_length(self) -> None:
        """
        Tests the explicit stream length

        :return: None
        """
        vl = VlBurr.build_filter([(1, BitPattern.from_str('1?'))], f_max=5)
        assert vl.ribbons == 5
        assert len(vl.query_filter_stream(1)) == 5
        with pytest.raises(ValueError):
            VlBurr.build_filter([(1, BitPattern.from_str('1?'))], f_max=1)

    def test_fallback_matches(self) -> None:
        """
        Tests ONE positions of patterns held in the fallback map

        :return: None
        """
        digests = TestUtils.random_digests(20, seed=13).tolist()
        vl = VlBurr.build_filter([(d, BitPattern.from_str('1?1')) for d in digests], BuildConfig(max_layers=0))
        assert len(vl.fallback) == 20
        for d in digests:
            stream = vl.query_filter_stream(d)
            assert stream.bit(0) == 1 and stream.bit(2) == 1


class TestVlSerialization:
    """
    Tests for the variable-length structure container
    """

    @pytest.mark.parametrize("masked", [False, True])
    def test_roundtrip_identical(self, masked) -> None:
        """
        Tests byte-identical re-encoding and answers after decoding

        :param masked: Whether the filter variant is serialized
        :return: None
        """
        digests = TestUtils.random_digests(1500, seed=31).tolist()
        if masked:
            vl = VlBurr.build_filter([(d, BitPattern.from_str('1?11')) for d in digests], BuildConfig(seed=31, max_layers=1))
        else:
            vl = VlBurr.build(list(zip(digests, random_values(1500, 7, 31))), BuildConfig(seed=31, max_layers=1))
        blob = vl.to_bytes()
        decoded = VlBurr.from_bytes(blob)
        assert decoded.to_bytes() == blob
        assert decoded.kind == vl.kind
        assert all(list(decoded.query_stream(d)) == list(vl.query_stream(d)) for d in digests[:200])

    def test_empty_roundtrip(self) -> None:
        """
        Tests a structure without ribbons

        :return: None
        """
        blob = VlBurr.build([]).to_bytes()
        assert VlBurr.from_bytes(blob).to_bytes() == blob

    def test_flipped_byte(self) -> None:
        """
        Tests that a flipped byte fails the checksum

        :return: None
        """
        blob = bytearray(VlBurr.build([(1, BitString.from_str('1011'))]).to_bytes())
        blob[-8] ^= 0x01
        with pytest.raises(ChecksumMismatch):
            VlBurr.from_bytes(bytes(blob))
