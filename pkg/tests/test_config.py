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
import os

import pytest

from config import Config, parse_env_variable
from lsfkit.custom_types import BuildConfig, LsfConfig

ENVVAR = "LSFKIT_TEST_KNOB"


class TestConfig:
    """
    Tests for the Config class and the environment variable parser
    """

    @pytest.fixture(autouse=True)
    def clean_env(self):
        os.environ.pop(ENVVAR, None)
        yield
        os.environ.pop(ENVVAR, None)

    @pytest.mark.parametrize("default", [None, "foo", 42, 0.01])
    def test_parse_env_variable_unset_default(self, default) -> None:
        """
        Tests that unset environment variables are parsed to their default value

        :param default: Default value to use if env var is unset
        :return: None
        """
        assert parse_env_variable(ENVVAR, default) == default

    @pytest.mark.parametrize("valtype, value, expected", [
        (bool, "True", True),
        (bool, "1", True),
        (bool, "false", False),
        (bool, "", False),
        (int, "1337", 1337),
        (int, "-42", -42),
        (int, "0x2a", 42),
        (int, "0XFF", 255),
        (float, "0.01", 0.01),
        (float, "1e-3", 0.001),
        (float, "-2", -2.0),
        (str, "adam", "adam"),
        (str, "", ""),
    ])
    def test_parse_env_variable_typecast(self, valtype, value, expected) -> None:
        """
        Tests that environment variables are cast to the requested type

        :param valtype: Type to cast the env var to
        :param value: Value to set the env var to
        :param expected: Expected value after casting
        :return: None
        """
        os.environ[ENVVAR] = value
        parsed = parse_env_variable(ENVVAR, None, valtype)
        assert parsed == expected
        assert type(parsed) is type(expected)

    @pytest.mark.parametrize("valtype, value", [
        (int, "13xxx37"),
        (int, "zweiundvierzig"),
        (int, ""),
        (int, "0xZZ"),
        (float, "abc"),
    ])
    def test_parse_env_variable_typecast_invalid(self, valtype, value) -> None:
        """
        Tests that unparsable values raise ValueError

        :param valtype: Type to cast the env var to
        :param value: Value to set the env var to
        :return: None
        """
        os.environ[ENVVAR] = value
        with pytest.raises(ValueError):
            parse_env_variable(ENVVAR, None, valtype)

    @pytest.mark.parametrize("value, expected", [
        ("True", True),
        ("false", False),
        ("1337", 1337),
        ("-42", -42),
        ("0.5", "0.5"),
        ("gnb", "gnb"),
    ])
    def test_parse_env_variable_auto_typecast(self, value, expected) -> None:
        """
        Tests automatic type detection. Floats are only parsed when requested.

        :param value: Value to set the env var to
        :param expected: Expected value after typecasting
        :return: None
        """
        os.environ[ENVVAR] = value
        assert parse_env_variable(ENVVAR, None) == expected
        assert type(parse_env_variable(ENVVAR, None)) is type(expected)

    def test_parse_env_variable_unset_typed(self) -> None:
        """
        Tests that forced types do not apply to unset variables

        :return: None
        """
        for valtype in (None, bool, int, float, str):
            assert parse_env_variable(ENVVAR, None, valtype) is None

    def test_defaults(self) -> None:
        """
        Tests the construction defaults that are not overridden in the test environment

        :return: None
        """
        assert Config.APP_NAME == 'lsfkit'
        assert isinstance(Config.LOG_LEVEL, int)
        assert Config.LOG_LEVEL in logging.getLevelNamesMapping().values()
        assert 1 <= Config.RIBBON_WIDTH <= 64
        assert Config.BUCKET_SIZE > 0
        assert Config.LR_OPTIMIZER in ('adam', 'sgd')

    def test_tostring(self) -> None:
        """
        Tests that the configuration dump lists every knob

        :return: None
        """
        dump = Config.tostring()
        assert dump.startswith('Configuration:')
        for key in ('MASTER_SEED', 'RIBBON_WIDTH', 'BUCKET_SIZE', 'OVERLOAD', 'STRUCTURE_DIR'):
            assert f'{key} =>' in dump
        assert 'tostring' not in dump

    def test_build_config_defaults_follow_config(self) -> None:
        """
        Tests that construction parameter objects read their defaults from Config

        :return: None
        """
        cfg = BuildConfig()
        assert cfg.w == Config.RIBBON_WIDTH
        assert cfg.bucket_size == Config.BUCKET_SIZE
        assert cfg.max_layers == Config.MAX_LAYERS
        assert LsfConfig().seed == Config.MASTER_SEED

    @pytest.mark.parametrize("kwargs", [
        {'w': 0},
        {'w': 65},
        {'bucket_size': 0},
        {'bucket_size': 1 << 16},
        {'overload': -1.0},
        {'max_layers': -1},
    ])
    def test_build_config_rejects_invalid_values(self, kwargs) -> None:
        """
        Tests validation of construction parameters

        :param kwargs: Invalid parameter
        :return: None
        """
        with pytest.raises(ValueError):
            BuildConfig(**kwargs)
