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

from lsfkit.hashing import (
    FNV_OFFSET_BASIS,
    RibbonParams,
    derive_parts,
    derive_parts_array,
    digest,
    digest_many,
    finalize,
    finalize_array,
    fingerprint_bits,
    fingerprint_word,
    fold,
    layer_seed,
    rehash,
    rehash_array,
    remix,
    remix_array,
    ribbon_offset,
    ribbon_offset_array,
)
from .conftest import TestUtils


class TestMixer:
    """
    Tests for the fixed byte fold and finalizer
    """

    @pytest.mark.parametrize("key, seed, expected", [
        (b'', 0, 0xf52a15e9a9b5e89b),
        (b'a', 0, 0x02c0bdbf481420f8),
        (b'a', 1, 0x8097ca68b9cc797b),
    ])
    def test_digest_golden(self, key, seed, expected) -> None:
        """
        Tests digests against frozen values so serialized structures stay portable

        :param key: Key bytes
        :param seed: Seed
        :param expected: Frozen digest
        :return: None
        """
        assert digest(key, seed) == expected

    def test_fold_golden(self) -> None:
        """
        Tests the byte fold against the published 64-bit FNV-1a values

        :return: None
        """
        assert fold(b'') == FNV_OFFSET_BASIS
        assert fold(b'a') == 0xaf63dc4c8601ec8c

    def test_finalize_golden(self) -> None:
        """
        Tests the finalizer on fixed inputs

        :return: None
        """
        assert finalize(0) == 0
        assert finalize(0x9E3779B97F4A7C15) == 0xe220a8397b1dcdaf
        assert digest(b'', 0) == finalize(FNV_OFFSET_BASIS)

    def test_digest_deterministic_and_seeded(self) -> None:
        """
        Tests that digests are pure and depend on the seed

        :return: None
        """
        assert digest(b'key', 42) == digest(b'key', 42)
        assert digest(b'key', 42) != digest(b'key', 43)
        assert digest(b'a', 0) != digest(b'a', 1)
        assert 0 <= digest(b'\xff' * 100, 2 ** 64 - 1) < 2 ** 64

    def test_digest_many_matches_scalar(self) -> None:
        """
        Tests that batched digests equal scalar digests in input order

        :return: None
        """
        keys = [str(i).encode() for i in range(100)]
        batch = digest_many(keys, 7)
        assert batch.dtype == np.uint64
        assert batch.tolist() == [digest(k, 7) for k in keys]

    def test_remix_and_rehash(self) -> None:
        """
        Tests that remix salts and rehash seeds give independent words

        :return: None
        """
        d = digest(b'x', 0)
        words = {remix(d, salt) for salt in range(32)}
        assert len(words) == 32
        assert rehash(d, 5) == finalize(d ^ 5)
        assert layer_seed(99, 0) != layer_seed(99, 1)
        assert layer_seed(99, 2) == remix(99, 258)


class TestRibbonParams:
    """
    Tests for layer shape validation
    """

    @pytest.mark.parametrize("kwargs", [
        {'m': 10, 'w': 16, 'bucket_size': 1},
        {'m': 100, 'w': 64, 'bucket_size': 10},
        {'m': 128, 'w': 0, 'bucket_size': 1},
        {'m': 128, 'w': 65, 'bucket_size': 1},
        {'m': 575, 'w': 64, 'bucket_size': 512, 'ribbons': 0},
    ])
    def test_invalid_params(self, kwargs) -> None:
        """
        Tests that invalid shapes are rejected

        :param kwargs: Shape parameters
        :return: None
        """
        with pytest.raises(ValueError):
            RibbonParams(**kwargs)

    def test_start_range_and_buckets(self) -> None:
        """
        Tests the derived start range and bucket count

        :return: None
        """
        params = RibbonParams(m=1024 + 63, w=64, bucket_size=512)
        assert params.start_range == 1024
        assert params.bucket_count == 2


class TestDerivation:
    """
    Tests for per-key ribbon parameters, ribbon offsets and fingerprints
    """

    PARAMS = RibbonParams(m=64 + 7, w=8, bucket_size=16)

    def test_parts_in_range(self) -> None:
        """
        Tests that start positions, coefficients, buckets and offsets are in range

        :return: None
        """
        for d in TestUtils.random_digests(2000, seed=1).tolist():
            parts = derive_parts(d, self.PARAMS)
            assert 0 <= parts.start <= self.PARAMS.m - self.PARAMS.w
            assert parts.coeffs & 1
            assert parts.coeffs >> self.PARAMS.w == 0
            assert parts.bucket * self.PARAMS.bucket_size + parts.offset == parts.start
            assert 0 <= parts.offset < self.PARAMS.bucket_size

    @pytest.mark.timeout(60)
    def test_start_uniform(self) -> None:
        """
        Tests that start positions are uniform over the start range

        :return: None
        """
        n = 100_000
        params = RibbonParams(m=64 + 63, w=64, bucket_size=64)
        starts, _, _, _ = derive_parts_array(TestUtils.random_digests(n, seed=2), params)
        counts = np.bincount(starts, minlength=64)
        expected = n / 64
        assert counts.min() >= 0 and len(counts) == 64
        assert np.all(np.abs(counts - expected) <= 5 * np.sqrt(expected))

    @pytest.mark.parametrize("params", [
        RibbonParams(m=64 + 7, w=8, bucket_size=16),
        RibbonParams(m=512 * 3 + 63, w=64, bucket_size=512, ribbons=5),
        RibbonParams(m=(1 << 20) + 31, w=32, bucket_size=512),
    ])
    def test_vectorized_matches_scalar(self, params) -> None:
        """
        Tests that the batched derivations equal the scalar ones

        :param params: Layer shape
        :return: None
        """
        digests = TestUtils.random_digests(500, seed=3)
        start, coeffs, bucket, offset = derive_parts_array(digests, params)
        offsets_b = ribbon_offset_array(digests, params.ribbons)
        for i, d in enumerate(digests.tolist()):
            parts = derive_parts(d, params)
            assert (int(start[i]), int(coeffs[i]), int(bucket[i]), int(offset[i])) == tuple(parts)
            assert int(offsets_b[i]) == ribbon_offset(d, params.ribbons)

    def test_vectorized_mixers_match_scalar(self) -> None:
        """
        Tests finalize, remix and rehash over arrays

        :return: None
        """
        digests = TestUtils.random_digests(200, seed=4)
        assert finalize_array(digests).tolist() == [finalize(d) for d in digests.tolist()]
        assert remix_array(digests, 9).tolist() == [remix(d, 9) for d in digests.tolist()]
        assert rehash_array(digests, 12345).tolist() == [rehash(d, 12345) for d in digests.tolist()]

    def test_ribbon_offset_single_ribbon(self) -> None:
        """
        Tests that a single ribbon always has offset 0

        :return: None
        """
        assert all(ribbon_offset(d, 1) == 0 for d in TestUtils.random_digests(100).tolist())

    @pytest.mark.timeout(60)
    def test_ribbon_offset_uniform(self) -> None:
        """
        Tests that ribbon offsets are near-uniform

        :return: None
        """
        n = 100_000
        offsets_b = ribbon_offset_array(TestUtils.random_digests(n, seed=5), 6)
        freq = np.bincount(offsets_b, minlength=6) / n
        assert np.all(np.abs(freq - 1 / 6) <= TestUtils.binomial_tolerance(n, 1 / 6, 4.0))

    def test_fingerprint_word_layout(self) -> None:
        """
        Tests that fingerprint bits 0..63 are remix(d, 16) read LSB first and
        that words spanning two generator words are stitched correctly

        :return: None
        """
        d = digest(b'fingerprint', 3)
        assert fingerprint_word(d, 0, 64) == remix(d, 16)
        assert [fingerprint_bits(d, i) for i in range(64)] == [(remix(d, 16) >> i) & 1 for i in range(64)]

        stitched = fingerprint_word(d, 60, 10)
        assert stitched == sum(fingerprint_bits(d, 60 + j) << j for j in range(10))
        assert fingerprint_bits(d, 64) == remix(d, 17) & 1
        assert fingerprint_word(d, 5, 0) == 0

    @pytest.mark.timeout(60)
    def test_fingerprint_balanced(self) -> None:
        """
        Tests that fingerprint bits are balanced over many digests

        :return: None
        """
        n = 100_000
        ones = sum(fingerprint_bits(d, 0) for d in TestUtils.random_digests(n, seed=6).tolist())
        assert abs(ones / n - 0.5) <= TestUtils.binomial_tolerance(n, 0.5, 4.0)

    def test_seed_change_rerandomizes(self) -> None:
        """
        Tests that a different seed changes the derived start positions of almost all keys

        :return: None
        """
        params = RibbonParams(m=4096 + 63, w=64, bucket_size=512)
        keys = [str(i).encode() for i in range(1000)]
        same = sum(derive_parts(digest(k, 1), params).start == derive_parts(digest(k, 2), params).start for k in keys)
        assert same < 20
