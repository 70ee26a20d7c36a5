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
from dataclasses import dataclass, field
from enum import IntEnum, StrEnum

from config import Config


class WorkerThreadInterrupter:
    """
    Job / Task to queue for interrupting a worker thread
    """
    def execute(self) -> None:
        return


class WorkerStatus(StrEnum):
    """
    Status values that the query service build worker can report
    """
    IDLE = 'IDLE'
    ACTIVE = 'ACTIVE'
    BUSY = 'BUSY'
    UNKNOWN = 'UNKNOWN'


class JobStatus(StrEnum):
    """
    Status values a single build job can have
    """
    UNINITIALIZED = 'UNINITIALIZED'
    AWAITING_PROCESSING = 'AWAITING_PROCESSING'
    TRAINING = 'TRAINING'
    BUILDING = 'BUILDING'
    FINISHED = 'FINISHED'
    FAILED = 'FAILED'
    TIMEOUT = 'TIMEOUT'


class StructureKind(IntEnum):
    """
    Structure kind byte stored in every container header
    """
    BURR = 1
    VL_PLAIN = 2
    VL_MASKED = 3
    LSF = 4


class ModelKind(IntEnum):
    """
    Model kind byte stored in the model block of an LSF container
    """
    GNB = 1
    LR = 2
    FREQ = 3


class ModelName(StrEnum):
    """
    Model names accepted on the command line and by the query service
    """
    GNB = 'gnb'
    LR = 'lr'
    FREQ = 'freq'


class LsfMode(IntEnum):
    """
    Coding mode of an LSF. Learned mode builds a Shannon code per key, CSF mode
    shares one Huffman code between all keys.
    """
    LEARNED = 0
    CSF = 1


class ColumnKind(StrEnum):
    """
    Kinds of feature columns in a dataset schema
    """
    NUMERIC = 'numeric'
    CATEGORICAL = 'categorical'


class InsertResult(StrEnum):
    """
    Outcome of adding one equation to a ribbon system
    """
    INSERTED = 'inserted'
    REDUNDANT = 'redundant'
    CONFLICT = 'conflict'


class Symbol(IntEnum):
    """
    Symbols of a filter bit pattern. ANY positions store nothing.
    """
    ANY = 0
    ONE = 1


class LsfError(Exception):
    """Base class of all domain errors raised by lsfkit"""


class DuplicateDigest(LsfError, ValueError):
    """Two construction inputs share the same 64-bit key digest"""


class DuplicateKey(LsfError, ValueError):
    """A key occurs more than once in the construction input"""


class ConstructionFailed(LsfError):
    """The fallback map would exceed its configured capacity"""


class StreamExhausted(LsfError, IndexError):
    """A bit stream was read past its last bit"""


class NotInner(LsfError, ValueError):
    """A code tree cursor at a leaf was asked to descend"""


class AllZero(LsfError, ValueError):
    """A raw distribution contains no positive entry"""


class DimensionMismatch(LsfError, ValueError):
    """A feature vector does not match the dimension a model was fitted on"""


class EmptyClass(LsfError, ValueError):
    """A class has no training sample"""


class WeightOutOfRange(LsfError, ValueError):
    """A relative membership weight lies outside of [0, 1/2]"""


class InvalidSigma(LsfError, ValueError):
    """A synthetic dataset was requested with a non-positive standard deviation"""


class MissingColumn(LsfError, ValueError):
    """A column named by the schema is absent from the CSV header"""


class ParseError(LsfError, ValueError):
    """A CSV cell could not be parsed"""

    def __init__(self, row: int, col: str, message: str = None):
        self.row = row
        self.col = col
        super().__init__(message or f'Could not parse column "{col}" in row {row}')


class EmptyDataset(LsfError, ValueError):
    """A dataset contains no rows"""


class FractionSum(LsfError, ValueError):
    """Split fractions do not sum to 1"""


class UnknownCategory(LsfError, KeyError):
    """A categorical value was not seen while fitting the scaler"""


class ContainerError(LsfError, ValueError):
    """Base class of all container decoding errors"""


class BadMagic(ContainerError):
    """The container does not start with the expected magic bytes"""


class VersionMismatch(ContainerError):
    """The container was written by an incompatible format version"""


class TruncatedInput(ContainerError):
    """The container ended before a complete record could be read"""


class ChecksumMismatch(ContainerError):
    """The CRC-32 trailer does not match the container contents"""


@dataclass(frozen=True)
class BuildConfig:
    """
    Construction parameters of a (variable-length) bumped ribbon structure
    """
    seed: int = 0
    w: int = field(default_factory=lambda: Config.RIBBON_WIDTH)
    bucket_size: int = field(default_factory=lambda: Config.BUCKET_SIZE)
    overload: float = field(default_factory=lambda: Config.OVERLOAD)
    max_layers: int = field(default_factory=lambda: Config.MAX_LAYERS)
    fallback_cap: int | None = field(default_factory=lambda: Config.FALLBACK_CAP)
    random_fill: bool = False

    def __post_init__(self):
        if not 1 <= self.w <= 64:
            raise ValueError(f'Ribbon width must be within [1, 64], got {self.w}')
        if self.bucket_size < 1 or self.bucket_size >= (1 << 16):
            raise ValueError(f'Bucket size must be within [1, 65535], got {self.bucket_size}')
        if self.overload <= -1.0:
            raise ValueError(f'Overload factor must be greater than -1, got {self.overload}')
        if self.max_layers < 0:
            raise ValueError(f'Number of layers must not be negative, got {self.max_layers}')


@dataclass(frozen=True)
class LsfConfig:
    """
    Construction parameters of a learned static function
    """
    seed: int = field(default_factory=lambda: Config.MASTER_SEED)
    mode: LsfMode = LsfMode.LEARNED
    randomized_rounding: bool = field(default_factory=lambda: Config.RANDOMIZED_WEIGHT_ROUNDING)
    predict_chunk_size: int = field(default_factory=lambda: Config.PREDICT_CHUNK_SIZE)
    force_slow_path: bool = False

    def structure_config(self, seed: int, random_fill: bool) -> BuildConfig:
        """
        Derives the ribbon build configuration of one of the inner structures

        :param seed: Structure seed
        :param random_fill: Whether free solution bits are filled with pseudo-random bits
        :return: BuildConfig for the inner structure
        """
        return BuildConfig(seed=seed, random_fill=random_fill)


def is_valid_structure_name(name: str) -> bool:
    """
    Checks whether a name can be used as structure file name

    :param name: Structure name
    :return: True if the name is a plain file name without forbidden characters
    """
    if not isinstance(name, str) or not name:
        return False

    # Do not allow paths
    if not os.path.basename(name) == name:
        return False

    # Do not allow forbidden characters
    if any(c in name for c in ["\0", "\\", "/", ":", "*", "?", "\"", "<", ">", "|", "."]):
        return False

    return True


class BuildRequest:
    """
    Deserialized JSON request for creating a build job in the query service
    """

    API_VERSION = 1

    def __init__(self,
                 api_version: int,
                 name: str,
                 data: str,
                 model: str,
                 seed: int = None,
                 schema: str = None,
                 mode: str = None):
        if api_version != self.API_VERSION:
            raise ValueError(f'API version mismatch. Expected: {self.API_VERSION}, Got: {api_version}.')

        self.api_version = api_version
        self.name = name
        self.data = data
        self.schema = schema
        self.model = model
        self.seed = Config.MASTER_SEED if seed is None else seed
        self.mode = mode or ('csf' if model == ModelName.FREQ else 'learned')

        if not self._validate_self():
            raise ValueError('Validation of request payload failed')

    @staticmethod
    def from_json(json: dict) -> 'BuildRequest':
        """
        Creates a new BuildRequest object from a JSON dictionary

        :param json: Deserialized request JSON
        :return: BuildRequest object
        """
        # Catch API version missmatch early
        if 'api_version' not in json:
            raise ValueError('API version missing in request payload')
        if not isinstance(json['api_version'], int):
            raise ValueError('API version must be an integer')

        return BuildRequest(**json)

    def _validate_self(self):
        """Validates this object based on current values"""
        if not is_valid_structure_name(self.name):
            return False

        if not isinstance(self.data, str) or not self.data:
            return False

        if self.schema is not None and not isinstance(self.schema, str):
            return False

        if self.model not in [m.value for m in ModelName]:
            return False

        if not isinstance(self.seed, int) or self.seed < 0:
            return False

        if self.mode not in ('learned', 'csf'):
            return False

        return True
