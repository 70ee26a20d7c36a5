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
import os
from pathlib import Path
from typing import Union

import numpy as np
import pytest

from config import Config
from lsfkit.datasets import Dataset, gen_gauss, write_csv
from lsfkit.query_service import app as original_app, structure_cache, worker


@pytest.fixture()
def app(tmp_path):
    app = original_app
    app.config.update({
        "TESTING": True,
    })

    # Stop a still running build worker, forget its jobs and all cached structures
    worker.reset()
    structure_cache.clear()

    # Enforce some config values for tests
    Config.UNIT_TESTS_RUNNING = True
    Config.REQUEST_TIMEOUT_SEC = 30
    structure_dir_orig = Config.STRUCTURE_DIR
    Config.STRUCTURE_DIR = str(tmp_path)

    yield app

    worker.reset()
    Config.STRUCTURE_DIR = structure_dir_orig


@pytest.fixture()
def client(app):
    return app.test_client()


@pytest.fixture()
def runner(app):
    return app.test_cli_runner()


@pytest.fixture(scope='session')
def gauss_small() -> Dataset:
    """Balanced 8-class gauss dataset with sigma 1, small enough for every test run"""
    return gen_gauss(4000, sigma=1.0, seed=42)


@pytest.fixture()
def gauss_csv(tmp_path, gauss_small) -> Path:
    """The small gauss dataset exported as CSV with schema sidecar"""
    path = tmp_path / 'gauss.csv'
    write_csv(gauss_small, str(path))
    return path


class TestUtils:
    """
    Util function for tests
    """

    @classmethod
    def assert_is_file_with_size(cls, file: Union[str, Path], min_size: int = None, max_size: int = None) -> None:
        """
        Asserts that the file exists and has the expected size.

        :param file: Path to file
        :param min_size: Minimum expected file size in bytes
        :param max_size: Maximum expected file size in bytes
        :return: None
        """
        assert os.path.isfile(file), f"File not found: {file}"

        fsize = os.path.getsize(file)
        if min_size:
            assert fsize >= min_size, f"File size too small: {fsize} bytes (at least {min_size} bytes required)"
        if max_size:
            assert fsize <= max_size, f"File size too large: {fsize} bytes (max {max_size} bytes allowed)"

    @classmethod
    def random_digests(cls, n: int, seed: int = 0) -> np.ndarray:
        """
        Draws n distinct 64-bit digests

        :param n: Number of digests
        :param seed: Generator seed
        :return: uint64 array
        """
        rng = np.random.default_rng(seed)
        digests = np.unique(rng.integers(0, 2 ** 64 - 1, size=n + 16, dtype=np.uint64, endpoint=True))
        assert len(digests) >= n
        return rng.permutation(digests)[:n]

    @classmethod
    def binomial_tolerance(cls, n: int, p: float, sigmas: float = 3.0) -> float:
        """
        Tolerance of an observed frequency around p

        :param n: Number of trials
        :param p: Success probability
        :param sigmas: Width in standard deviations
        :return: Absolute tolerance
        """
        return sigmas * (p * (1 - p) / n) ** 0.5
