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


def parse_env_variable(name, default=None, valtype=None) -> None | bool | int | float | str:
    """
    Parses an environment variable and returns it cast to the desired type.
    Undefined variables will return the default value.

    :param name: Name of the environment variable to evaluate
    :param default: Default to return if the variable is not set
    :param valtype: Force return type. Pass None for automatic type detection
    :return: Parsed value
    """
    # Detect unset variables
    value = os.getenv(name, default=None)
    if value is None:
        return default

    # Forced type casts
    if valtype is bool:
        return value.lower() in ['true', '1']
    if valtype is int:
        return int(value, 16) if value.lower().startswith('0x') else int(value)
    if valtype is float:
        return float(value)
    if valtype is str:
        return value

    # Automatic type detection
    if value.lower() in ['true', 'false']:
        return value.lower() == 'true'
    if value.lstrip('-+').isdigit():
        return int(value)

    # String fallback
    return value


class Config:

    APP_NAME = "lsfkit"
    """Name of this app"""

    VERSION = "1.0.0"
    """Version of this app"""

    LOG_LEVEL = logging.getLevelNamesMapping()[parse_env_variable('LSFKIT_LOG_LEVEL', default='INFO', valtype=str)]
    """Python Logger logging level"""

    UNIT_TESTS_RUNNING = False
    """Whether unit tests are currently running. This should always be kept at `False` and is only changed by pytest."""

    MASTER_SEED = parse_env_variable('LSFKIT_SEED', default=42, valtype=int)
    """Master seed from which key digests and all structure seeds are derived. Overrides the `--seed` default of every command."""

    RIBBON_WIDTH = parse_env_variable('LSFKIT_RIBBON_WIDTH', default=64, valtype=int)
    """Ribbon width w in bits. Coefficient windows span w consecutive solution columns."""

    BUCKET_SIZE = parse_env_variable('LSFKIT_BUCKET_SIZE', default=512, valtype=int)
    """Number of consecutive starting positions that share one bumping threshold"""

    OVERLOAD = parse_env_variable('LSFKIT_OVERLOAD', default=0.01, valtype=float)
    """Overload factor of every ribbon layer. A layer with n keys gets about n / (1 + OVERLOAD) slots."""

    MAX_LAYERS = parse_env_variable('LSFKIT_MAX_LAYERS', default=3, valtype=int)
    """Number of ribbon layers before surviving keys are stored in the explicit fallback map"""

    FALLBACK_CAP = parse_env_variable('LSFKIT_FALLBACK_CAP', default=None, valtype=int)
    """Maximum number of entries in the fallback map. Construction fails if exceeded. Unset means unlimited."""

    PREDICT_CHUNK_SIZE = parse_env_variable('LSFKIT_PREDICT_CHUNK_SIZE', default=65536, valtype=int)
    """Number of rows per model inference batch during construction"""

    RANDOMIZED_WEIGHT_ROUNDING = parse_env_variable('LSFKIT_RANDOMIZED_WEIGHT_ROUNDING', default=False, valtype=bool)
    """Randomized rounding of filter weights for miscalibrated models. Not supported yet, enabling it aborts builds."""

    LR_LEARNING_RATE = parse_env_variable('LSFKIT_LR_LEARNING_RATE', default=0.05, valtype=float)
    """Learning rate of the softmax regression optimizer"""

    LR_BATCH_SIZE = parse_env_variable('LSFKIT_LR_BATCH_SIZE', default=256, valtype=int)
    """Mini-batch size of the softmax regression optimizer"""

    LR_MAX_EPOCHS = parse_env_variable('LSFKIT_LR_MAX_EPOCHS', default=100, valtype=int)
    """Maximum number of training epochs for softmax regression"""

    LR_PATIENCE = parse_env_variable('LSFKIT_LR_PATIENCE', default=3, valtype=int)
    """Number of epochs without a 1% validation improvement before training stops"""

    LR_OPTIMIZER = parse_env_variable('LSFKIT_LR_OPTIMIZER', default='adam', valtype=str)
    """Optimizer used for softmax regression. One of 'adam' or 'sgd'."""

    ECE_BINS = parse_env_variable('LSFKIT_ECE_BINS', default=50, valtype=int)
    """Number of equal-count bins used to compute the expected calibration error"""

    BENCH_QUERIES = parse_env_variable('LSFKIT_BENCH_QUERIES', default=1000000, valtype=int)
    """Number of randomly sampled keys per benchmark run"""

    BENCH_RUNS = parse_env_variable('LSFKIT_BENCH_RUNS', default=10, valtype=int)
    """Number of benchmark repetitions that are averaged"""

    SERVER_HOST = parse_env_variable('LSFKIT_SERVER_HOST', default='0.0.0.0', valtype=str)
    """Host for the query service to bind to"""

    SERVER_PORT = parse_env_variable('LSFKIT_SERVER_PORT', default='8080', valtype=int)
    """Port for the query service to listen on"""

    QUEUE_SIZE = parse_env_variable('LSFKIT_QUEUE_SIZE', default=4, valtype=int)
    """Maximum number of build jobs that are queued before returning an error."""

    HISTORY_SIZE = parse_env_variable('LSFKIT_HISTORY_SIZE', default=128, valtype=int)
    """Maximum number of build jobs to keep in the history before forgetting about them."""

    REQUEST_TIMEOUT_SEC = parse_env_variable('LSFKIT_REQUEST_TIMEOUT_SEC', default=(60 * 60), valtype=int)
    """Number of seconds before a single build job is aborted."""

    STRUCTURE_DIR = parse_env_variable('LSFKIT_STRUCTURE_DIR', default='.', valtype=str)
    """Directory the query service writes built structures to and loads them from"""

    QUERY_BATCH_LIMIT = parse_env_variable('LSFKIT_QUERY_BATCH_LIMIT', default=10000, valtype=int)
    """Maximum number of rows a single query request may contain"""

    @staticmethod
    def tostring() -> str:
        """
        Dumps the full configuration to a string.

        :return: Configuration as string
        """
        ret = "Configuration:"
        for key, value in vars(Config).items():
            if not (key.startswith('_') or key == 'tostring'):
                ret += f"\n  {key} => {value}"

        return ret
