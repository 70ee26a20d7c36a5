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

import csv
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .custom_types import (
    ColumnKind,
    DuplicateKey,
    EmptyDataset,
    FractionSum,
    InvalidSigma,
    MissingColumn,
    ParseError,
)
from .models import Scaler

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind


@dataclass(frozen=True)
class Schema:
    """
    Describes a CSV table: the label column, an optional key column and the
    kinds of all feature columns
    """
    label: str
    columns: tuple[Column, ...]
    key: str | None = None

    @staticmethod
    def from_json(json_data: dict) -> 'Schema':
        """
        Creates a Schema from its sidecar JSON representation

        :param json_data: Deserialized schema JSON
        :return: Schema object
        """
        if 'label' not in json_data or 'columns' not in json_data:
            raise ValueError('Schema requires "label" and "columns"')
        columns = tuple(Column(c['name'], ColumnKind(c['kind'])) for c in json_data['columns'])
        return Schema(label=json_data['label'], columns=columns, key=json_data.get('key'))

    def to_json(self) -> dict:
        return {
            'key': self.key,
            'label': self.label,
            'columns': [{'name': c.name, 'kind': c.kind.value} for c in self.columns],
        }

    @staticmethod
    def load(path: str) -> 'Schema':
        with open(path, 'r', encoding='utf-8') as f:
            return Schema.from_json(json.load(f))

    def save(self, path: str) -> None:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_json(), f, indent=2)

    @staticmethod
    def sidecar_path(csv_path: str) -> str:
        """Default location of the schema file belonging to a CSV file"""
        return f'{os.path.splitext(csv_path)[0]}.schema.json'


def _value_order(names: set[str]) -> list[str]:
    """Numeric label names in numeric order, others lexicographically"""
    try:
        return sorted(names, key=float)
    except ValueError:
        return sorted(names)


@dataclass(eq=False)
class Dataset:
    """
    Keys with raw feature table, preprocessed features and label indices.
    `value_names[i]` is the original label of value index i.
    """
    keys: list[bytes]
    table: dict[str, np.ndarray]
    features: np.ndarray
    labels: np.ndarray
    value_names: list[str]
    schema: Schema
    scaler: Scaler

    def __post_init__(self):
        n = len(self.keys)
        if len(self.labels) != n or self.features.shape[0] != n:
            raise ValueError('Keys, features and labels are not aligned')
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.value_names)):
            raise ValueError('Label index out of range')

    @staticmethod
    def from_table(keys: list[bytes],
                   table: dict[str, np.ndarray],
                   raw_labels: list[str],
                   schema: Schema,
                   scaler: Scaler = None,
                   value_names: list[str] = None) -> 'Dataset':
        """
        Builds a dataset from raw columns, fitting the scaler unless one is given

        :param keys: Row keys
        :param table: Raw feature columns
        :param raw_labels: Label of every row
        :param schema: Schema of the table
        :param scaler: Preprocessing parameters to reuse
        :param value_names: Value ordering to reuse
        :return: Dataset
        """
        if len(set(keys)) != len(keys):
            raise DuplicateKey('Dataset contains duplicate keys')
        if value_names is None:
            value_names = _value_order(set(raw_labels))
        index = {name: i for i, name in enumerate(value_names)}
        unknown = set(raw_labels) - index.keys()
        if unknown:
            raise ValueError(f'Unknown values {sorted(unknown)[:5]}')
        labels = np.fromiter((index[label] for label in raw_labels), dtype=np.int64, count=len(raw_labels))
        if scaler is None:
            scaler = Scaler.fit(table, schema)
        return Dataset(keys=keys, table=table, features=scaler.transform(table), labels=labels,
                       value_names=value_names, schema=schema, scaler=scaler)

    @property
    def n(self) -> int:
        return len(self.keys)

    @property
    def classes(self) -> int:
        return len(self.value_names)

    def h0(self) -> float:
        """Zero-order empirical entropy of the labels in bits"""
        if self.n == 0:
            return 0.0
        counts = np.bincount(self.labels, minlength=self.classes)
        p = counts[counts > 0] / self.n
        return float(-(p * np.log2(p)).sum())

    def subset(self, indices: np.ndarray) -> 'Dataset':
        """Rows at the given indices, sharing scaler and value ordering"""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(keys=[self.keys[i] for i in indices.tolist()],
                       table={name: col[indices] for name, col in self.table.items()},
                       features=self.features[indices],
                       labels=self.labels[indices],
                       value_names=self.value_names,
                       schema=self.schema,
                       scaler=self.scaler)


def gen_gauss(n: int, classes: int = 8, sigma: float = 1.0, spacing: float = 2.0, seed: int = 42) -> Dataset:
    """
    Generates the gauss dataset: one numeric feature x ~ Normal(spacing * c, sigma^2)
    for label c. Row i has label i mod classes, n is truncated to a multiple of classes.

    :param n: Number of rows
    :param classes: Number of classes
    :param sigma: Standard deviation of every class
    :param spacing: Distance between neighbouring class means
    :param seed: Generator seed
    :return: Dataset with keys b'0', b'1', ...
    """
    if not sigma > 0:
        raise InvalidSigma(f'Standard deviation must be positive, got {sigma}')
    if classes < 1:
        raise ValueError(f'Class count must be positive, got {classes}')
    if n % classes:
        logger.warning(f'Truncating n = {n} to a multiple of {classes} classes')
        n -= n % classes

    labels = np.arange(n, dtype=np.int64) % classes

    # Box-Muller on seeded uniforms, both outputs of every pair are used
    rng = np.random.default_rng(seed)
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([radius * np.cos(2.0 * math.pi * u2), radius * np.sin(2.0 * math.pi * u2)])[:n]

    x = spacing * labels.astype(np.float64) + sigma * z
    schema = Schema(label='label', columns=(Column('x', ColumnKind.NUMERIC),), key='key')
    value_names = [str(c) for c in range(classes)]
    keys = [str(i).encode() for i in range(n)]
    return Dataset.from_table(keys, {'x': x}, [value_names[c] for c in labels.tolist()], schema, value_names=value_names)


def load_csv(path: str, schema: Schema = None, scaler: Scaler = None, value_names: list[str] = None) -> Dataset:
    """
    Reads a UTF-8 CSV file with header row. Row numbers in errors are file
    line numbers.

    :param path: CSV file
    :param schema: Schema, read from the sidecar file if omitted
    :param scaler: Preprocessing parameters to reuse instead of fitting new ones
    :param value_names: Value ordering to reuse
    :return: Dataset
    :raises MissingColumn: If a schema column is absent from the header
    :raises ParseError: If a numeric cell cannot be parsed
    :raises EmptyDataset: If the file has no data rows
    """
    if schema is None:
        schema = Schema.load(Schema.sidecar_path(path))

    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f'{path} is empty')

        position = {name: i for i, name in enumerate(header)}
        needed = [schema.label] + [c.name for c in schema.columns] + ([schema.key] if schema.key else [])
        for name in needed:
            if name not in position:
                raise MissingColumn(f'Column "{name}" not found in {path}')

        keys, raw_labels = [], []
        cells = {c.name: [] for c in schema.columns}
        for line, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(line, header[min(len(record), len(header) - 1)], f'Row {line} has {len(record)} cells, expected {len(header)}')
            for c in schema.columns:
                value = record[position[c.name]]
                if c.kind == ColumnKind.NUMERIC:
                    try:
                        number = float(value)
                    except ValueError:
                        raise ParseError(line, c.name)
                    if not math.isfinite(number):
                        raise ParseError(line, c.name, f'Non-finite value in column "{c.name}" in row {line}')
                    cells[c.name].append(number)
                else:
                    cells[c.name].append(value)
            raw_labels.append(record[position[schema.label]])
            keys.append((record[position[schema.key]] if schema.key else str(len(keys))).encode())

    if not keys:
        raise EmptyDataset(f'{path} contains no data rows')

    table = {
        c.name: np.asarray(cells[c.name], dtype=np.float64 if c.kind == ColumnKind.NUMERIC else object)
        for c in schema.columns
    }
    logger.info(f'Loaded {len(keys)} rows with {len(schema.columns)} feature columns from {path}')
    return Dataset.from_table(keys, table, raw_labels, schema, scaler=scaler, value_names=value_names)


def write_csv(ds: Dataset, path: str, write_schema: bool = True) -> None:
    """
    Writes the raw table of a dataset, plus its schema sidecar

    :param ds: Dataset to export
    :param path: Target CSV file
    :param write_schema: Whether to write the schema sidecar file
    :return: None
    """
    key_name = ds.schema.key or 'key'
    schema = Schema(label=ds.schema.label, columns=ds.schema.columns, key=key_name)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([key_name] + [c.name for c in schema.columns] + [schema.label])
        columns = [ds.table[c.name].tolist() for c in schema.columns]
        for i in range(ds.n):
            cells = [repr(col[i]) if isinstance(col[i], float) else col[i] for col in columns]
            writer.writerow([ds.keys[i].decode()] + cells + [ds.value_names[ds.labels[i]]])
    if write_schema:
        schema.save(Schema.sidecar_path(path))


def split(ds: Dataset, fractions: tuple[float, ...], seed: int) -> tuple[Dataset, ...]:
    """
    Stratified split: every class is shuffled under the seed and cut according
    to the fractions

    :param ds: Dataset to split
    :param fractions: Part sizes, summing to 1
    :param seed: Shuffle seed
    :return: One dataset per fraction
    :raises FractionSum: If the fractions do not sum to 1
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise FractionSum(f'Split fractions {fractions} do not sum to 1')

    rng = np.random.default_rng(seed)
    parts = [[] for _ in fractions]
    bounds = np.cumsum(fractions)
    for c in range(ds.classes):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(len(members))]
        cuts = np.rint(bounds * len(members)).astype(np.int64)
        cuts[-1] = len(members)
        start = 0
        for i, end in enumerate(cuts.tolist()):
            parts[i].append(members[start:end])
            start = end
    return tuple(ds.subset(np.sort(np.concatenate(p)) if p else np.empty(0, dtype=np.int64)) for p in parts)
