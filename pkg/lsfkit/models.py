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
Probability models mapping feature vectors to distributions over value
indices, feature preprocessing and calibration metrics.

Fitted parameters are rounded to float16 before use, so the distributions seen
during construction are the ones a deserialized model reproduces at query time.
Inference accumulates per feature and per class so that a row gets the same
distribution no matter how many rows are predicted together.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from config import Config
from .coding import clamp_normalize
from .container import ByteReader, ByteWriter
from .custom_types import ColumnKind, DimensionMismatch, EmptyClass, ModelKind, ModelName, UnknownCategory

if TYPE_CHECKING:
    from .datasets import Schema

logger = logging.getLogger(__name__)

F16_TINY = float(np.finfo(np.float16).smallest_subnormal)
LN2 = math.log(2.0)


def quantize(values: np.ndarray) -> np.ndarray:
    """Rounds to float16 precision, returned as float64"""
    return np.asarray(values, dtype=np.float64).astype(np.float16).astype(np.float64)


class Scaler:
    """
    Standard scaling for numeric columns and one-hot encoding for categorical
    columns, in schema column order
    """

    STD_FLOOR = 1e-9

    def __init__(self, entries: list[dict]):
        self.entries = entries
        self._category_index = [
            {c: i for i, c in enumerate(e['categories'])} if e['kind'] == ColumnKind.CATEGORICAL else None
            for e in entries
        ]

    @staticmethod
    def fit(table: dict[str, np.ndarray], schema: 'Schema') -> 'Scaler':
        """
        Determines scaling parameters from a raw table

        :param table: Raw columns
        :param schema: Column kinds
        :return: Fitted Scaler
        """
        entries = []
        for column in schema.columns:
            values = table[column.name]
            if column.kind == ColumnKind.NUMERIC:
                mean = float(values.mean()) if len(values) else 0.0
                std = float(values.std()) if len(values) else 1.0
                entries.append({'name': column.name, 'kind': ColumnKind.NUMERIC, 'mean': mean, 'std': max(std, Scaler.STD_FLOOR)})
            else:
                entries.append({'name': column.name, 'kind': ColumnKind.CATEGORICAL, 'categories': sorted(set(values.tolist()))})
        return Scaler(entries)

    @property
    def dim(self) -> int:
        return sum(1 if e['kind'] == ColumnKind.NUMERIC else len(e['categories']) for e in self.entries)

    def transform(self, table: dict[str, np.ndarray], strict: bool = False) -> np.ndarray:
        """
        Maps raw columns to features. Unknown categories yield an all-zero
        one-hot block.

        :param table: Raw columns
        :param strict: Raise on unknown categories instead of logging them
        :return: float64 feature matrix
        :raises UnknownCategory: If strict and a category was not seen while fitting
        """
        n = len(next(iter(table.values()))) if table else 0
        blocks = []
        for entry, index in zip(self.entries, self._category_index):
            values = table[entry['name']]
            if entry['kind'] == ColumnKind.NUMERIC:
                blocks.append(((np.asarray(values, dtype=np.float64) - entry['mean']) / entry['std'])[:, None])
                continue

            block = np.zeros((n, len(index)), dtype=np.float64)
            unknown = 0
            for row, value in enumerate(values.tolist()):
                position = index.get(value)
                if position is None:
                    if strict:
                        raise UnknownCategory(f'Unknown category {value!r} in column "{entry["name"]}"')
                    unknown += 1
                else:
                    block[row, position] = 1.0
            if unknown:
                logger.warning(f'{unknown} rows with unknown categories in column "{entry["name"]}" encoded as all zeros')
            blocks.append(block)
        return np.hstack(blocks) if blocks else np.zeros((n, 0), dtype=np.float64)

    def table_from_rows(self, rows: list[dict]) -> dict[str, np.ndarray]:
        """
        Converts row dictionaries (e.g. from JSON) into raw columns

        :param rows: One mapping column name -> value per row
        :return: Raw columns
        """
        table = {}
        for entry in self.entries:
            try:
                values = [row[entry['name']] for row in rows]
            except KeyError:
                raise KeyError(f'Column "{entry["name"]}" missing in query row')
            if entry['kind'] == ColumnKind.NUMERIC:
                table[entry['name']] = np.asarray([float(v) for v in values], dtype=np.float64)
            else:
                table[entry['name']] = np.asarray([str(v) for v in values], dtype=object)
        return table

    def to_json(self) -> list[dict]:
        return [{**e, 'kind': e['kind'].value} for e in self.entries]

    @staticmethod
    def from_json(data: list[dict]) -> 'Scaler':
        return Scaler([{**e, 'kind': ColumnKind(e['kind'])} for e in data])


class ProbabilityModel(ABC):
    """
    Maps feature vectors of dimension `dim` to distributions over `classes` values
    """

    kind: ModelKind

    def __init__(self, dim: int, classes: int):
        self.dim = dim
        self.classes = classes

    @abstractmethod
    def _log_weights(self, x: np.ndarray) -> np.ndarray:
        """Unnormalized log probabilities, shape (n, classes)"""

    @abstractmethod
    def _write_params(self, writer: ByteWriter) -> None:
        pass

    @property
    @abstractmethod
    def param_count(self) -> int:
        pass

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """
        Predicts the distributions of a batch of feature vectors

        :param x: Feature matrix of shape (n, dim)
        :return: Clamped distributions of shape (n, classes)
        :raises DimensionMismatch: If the feature dimension does not match
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatch(f'Expected feature vectors of dimension {self.dim}, got shape {x.shape}')
        if len(x) == 0:
            return np.zeros((0, self.classes), dtype=np.float64)
        logits = self._log_weights(x)
        logits -= logits.max(axis=1, keepdims=True)
        return clamp_normalize(np.exp(logits))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Distribution of a single feature vector"""
        return self.predict_proba(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    def predict_chunked(self, x: np.ndarray, chunk_size: int = None):
        """
        Yields (offset, distributions) for consecutive row chunks

        :param x: Feature matrix
        :param chunk_size: Rows per inference batch
        """
        chunk_size = chunk_size or Config.PREDICT_CHUNK_SIZE
        for offset in range(0, len(x), chunk_size):
            yield offset, self.predict_proba(x[offset:offset + chunk_size])

    def write(self, writer: ByteWriter) -> None:
        """Model block: kind u8, dim u32, classes u32, parameters"""
        writer.u8(self.kind)
        writer.u32(self.dim)
        writer.u32(self.classes)
        self._write_params(writer)

    def encoded_bits(self) -> int:
        """Size of the serialized model block in bits"""
        writer = ByteWriter()
        self.write(writer)
        return len(writer.buffer) * 8


class GnbModel(ProbabilityModel):
    """
    Gaussian naive Bayes with per-class priors, means and variances
    """

    kind = ModelKind.GNB

    def __init__(self, log_priors: np.ndarray, means: np.ndarray, variances: np.ndarray):
        means = np.atleast_2d(means)
        super().__init__(dim=means.shape[1], classes=means.shape[0])
        self.log_priors = quantize(log_priors)
        self.means = quantize(means)
        self.variances = np.maximum(quantize(variances), F16_TINY)
        self._const = -0.5 * np.log(2.0 * math.pi * self.variances)
        self._inv2var = 1.0 / (2.0 * self.variances)

    @property
    def param_count(self) -> int:
        return self.classes * (1 + 2 * self.dim)

    def _log_weights(self, x: np.ndarray) -> np.ndarray:
        ll = np.broadcast_to(self.log_priors, (len(x), self.classes)).copy()
        for j in range(self.dim):
            diff = x[:, j:j + 1] - self.means[:, j]
            ll += self._const[:, j] - diff * diff * self._inv2var[:, j]
        return ll

    def _write_params(self, writer: ByteWriter) -> None:
        writer.array(self.log_priors, '<f2')
        writer.array(self.means, '<f2')
        writer.array(self.variances, '<f2')

    @staticmethod
    def fit(x: np.ndarray, y: np.ndarray, classes: int) -> 'GnbModel':
        """
        Per-class sample means and population variances. Variances are floored
        at 1e-6 times the global variance of the feature.

        :param x: Feature matrix
        :param y: Value indices
        :param classes: Number of values
        :return: Fitted model
        :raises EmptyClass: If a value has no sample
        """
        counts = np.bincount(y, minlength=classes)
        if np.any(counts == 0):
            raise EmptyClass(f'Values {np.flatnonzero(counts == 0).tolist()} have no training sample')

        global_var = x.var(axis=0)
        floor = 1e-6 * np.where(global_var > 0, global_var, 1.0)
        means = np.empty((classes, x.shape[1]))
        variances = np.empty((classes, x.shape[1]))
        for c in range(classes):
            members = x[y == c]
            means[c] = members.mean(axis=0)
            variances[c] = np.maximum(members.var(axis=0), floor)

        logger.info(f'Fitted GNB with {classes} classes on {len(y)} samples of dimension {x.shape[1]}')
        return GnbModel(np.log(counts / len(y)), means, variances)


class LrModel(ProbabilityModel):
    """
    Multinomial logistic (softmax) regression
    """

    kind = ModelKind.LR

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.atleast_2d(weights)
        super().__init__(dim=weights.shape[0], classes=weights.shape[1])
        self.weights = quantize(weights)
        self.bias = quantize(bias)

    @property
    def param_count(self) -> int:
        return self.classes * (self.dim + 1)

    def _log_weights(self, x: np.ndarray) -> np.ndarray:
        logits = np.broadcast_to(self.bias, (len(x), self.classes)).copy()
        for j in range(self.dim):
            logits += x[:, j:j + 1] * self.weights[j]
        return logits

    def _write_params(self, writer: ByteWriter) -> None:
        writer.array(self.weights, '<f2')
        writer.array(self.bias, '<f2')


class FreqModel(ProbabilityModel):
    """
    Global value frequencies, independent of the features. Stores exact counts.
    """

    kind = ModelKind.FREQ

    def __init__(self, counts: np.ndarray, dim: int = 0):
        super().__init__(dim=dim, classes=len(counts))
        self.counts = np.asarray(counts, dtype=np.uint64)
        self.frequencies = self.counts.astype(np.float64) / max(int(self.counts.sum()), 1)

    @property
    def param_count(self) -> int:
        return self.classes

    def _log_weights(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatch(f'Expected feature vectors of dimension {self.dim}, got shape {x.shape}')
        weights = self.frequencies if self.counts.sum() else np.ones(self.classes)
        return np.broadcast_to(clamp_normalize(weights), (len(x), self.classes)).copy()

    def _write_params(self, writer: ByteWriter) -> None:
        writer.array(self.counts, '<u8')

    @staticmethod
    def fit(y: np.ndarray, classes: int, dim: int = 0) -> 'FreqModel':
        return FreqModel(np.bincount(y, minlength=classes), dim=dim)


def read_model(reader: ByteReader) -> ProbabilityModel:
    """
    Reads a model block written by `ProbabilityModel.write`

    :param reader: Source reader
    :return: Deserialized model
    """
    kind = ModelKind(reader.u8())
    dim = reader.u32()
    classes = reader.u32()
    if kind == ModelKind.GNB:
        log_priors = reader.array(classes, '<f2').astype(np.float64)
        means = reader.array(classes * dim, '<f2').astype(np.float64).reshape(classes, dim)
        variances = reader.array(classes * dim, '<f2').astype(np.float64).reshape(classes, dim)
        return GnbModel(log_priors, means, variances)
    if kind == ModelKind.LR:
        weights = reader.array(dim * classes, '<f2').astype(np.float64).reshape(dim, classes)
        return LrModel(weights, reader.array(classes, '<f2').astype(np.float64))
    return FreqModel(reader.array(classes, '<u8'), dim=dim)


@dataclass(frozen=True)
class LrHyper:
    """
    Training parameters of softmax regression
    """
    learning_rate: float = field(default_factory=lambda: Config.LR_LEARNING_RATE)
    batch_size: int = field(default_factory=lambda: Config.LR_BATCH_SIZE)
    max_epochs: int = field(default_factory=lambda: Config.LR_MAX_EPOCHS)
    patience: int = field(default_factory=lambda: Config.LR_PATIENCE)
    optimizer: str = field(default_factory=lambda: Config.LR_OPTIMIZER)
    seed: int = 0
    validation_fraction: float = 0.1
    min_improvement: float = 0.01

    def __post_init__(self):
        if self.optimizer not in ('adam', 'sgd'):
            raise ValueError(f'Unknown optimizer "{self.optimizer}"')


def surprisal_gradient(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Mean surprisal in bits of softmax regression and its gradient

    :param weights: Weight matrix (dim, classes)
    :param bias: Bias vector (classes)
    :param x: Feature matrix
    :param y: Value indices
    :return: Tuple (loss, gradient of weights, gradient of bias)
    """
    n = len(y)
    logits = x @ weights + bias
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    total = exp.sum(axis=1, keepdims=True)
    probs = exp / total
    loss = float((np.log(total[:, 0]) - logits[np.arange(n), y]).mean() / LN2)

    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n * LN2
    return loss, x.T @ delta, delta.sum(axis=0)


def mean_surprisal(weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """Mean surprisal in bits of softmax regression"""
    logits = x @ weights + bias
    logits -= logits.max(axis=1, keepdims=True)
    log_total = np.log(np.exp(logits).sum(axis=1))
    return float((log_total - logits[np.arange(len(y)), y]).mean() / LN2)


def lr_fit(x: np.ndarray, y: np.ndarray, classes: int, hyper: LrHyper = None) -> LrModel:
    """
    Trains softmax regression with mini-batch gradient descent on the mean
    surprisal. Training stops once the validation surprisal has not improved by
    `min_improvement` for `patience` epochs. The best validation snapshot wins.

    :param x: Feature matrix
    :param y: Value indices
    :param classes: Number of values
    :param hyper: Training parameters
    :return: Fitted model
    """
    hyper = hyper or LrHyper()
    n, dim = x.shape
    rng = np.random.default_rng(hyper.seed)
    order = rng.permutation(n)
    n_val = int(n * hyper.validation_fraction) if n >= 10 else 0
    train = order[:n - n_val]
    val = order[n - n_val:] if n_val else train

    weights = np.zeros((dim, classes))
    bias = np.zeros(classes)
    m_w, v_w = np.zeros_like(weights), np.zeros_like(weights)
    m_b, v_b = np.zeros_like(bias), np.zeros_like(bias)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0

    best_loss = mean_surprisal(weights, bias, x[val], y[val]) if n else math.inf
    best = (weights.copy(), bias.copy())
    reference = best_loss
    stale = 0

    for epoch in range(hyper.max_epochs):
        batches = train[rng.permutation(len(train))]
        for start in range(0, len(batches), hyper.batch_size):
            idx = batches[start:start + hyper.batch_size]
            _, g_w, g_b = surprisal_gradient(weights, bias, x[idx], y[idx])
            if hyper.optimizer == 'sgd':
                weights -= hyper.learning_rate * g_w
                bias -= hyper.learning_rate * g_b
                continue

            step += 1
            m_w = beta1 * m_w + (1 - beta1) * g_w
            v_w = beta2 * v_w + (1 - beta2) * g_w * g_w
            m_b = beta1 * m_b + (1 - beta1) * g_b
            v_b = beta2 * v_b + (1 - beta2) * g_b * g_b
            correction1, correction2 = 1 - beta1 ** step, 1 - beta2 ** step
            weights -= hyper.learning_rate * (m_w / correction1) / (np.sqrt(v_w / correction2) + eps)
            bias -= hyper.learning_rate * (m_b / correction1) / (np.sqrt(v_b / correction2) + eps)

        loss = mean_surprisal(weights, bias, x[val], y[val])
        if loss < best_loss:
            best_loss = loss
            best = (weights.copy(), bias.copy())
        if loss < reference * (1.0 - hyper.min_improvement):
            reference = loss
            stale = 0
        else:
            stale += 1
            if stale >= hyper.patience:
                logger.debug(f'Stopping after epoch {epoch + 1}: no {hyper.min_improvement:.0%} improvement for {stale} epochs')
                break
        logger.debug(f'Epoch {epoch + 1}: validation surprisal {loss:.5f} bits/key')
    else:
        if hyper.max_epochs:
            logger.warning(f'Softmax regression did not converge within {hyper.max_epochs} epochs')

    logger.info(f'Fitted LR with {classes} classes on {n} samples of dimension {dim}, validation surprisal {best_loss:.5f} bits/key')
    return LrModel(*best)


def fit_model(name: ModelName, x: np.ndarray, y: np.ndarray, classes: int, hyper: LrHyper = None) -> ProbabilityModel:
    """
    Fits a model by name

    :param name: Model name
    :param x: Feature matrix
    :param y: Value indices
    :param classes: Number of values
    :param hyper: Training parameters for softmax regression
    :return: Fitted model
    """
    match ModelName(name):
        case ModelName.GNB:
            return GnbModel.fit(x, y, classes)
        case ModelName.LR:
            return lr_fit(x, y, classes, hyper)
        case ModelName.FREQ:
            return FreqModel.fit(y, classes, dim=x.shape[1])


def surprisal(model: ProbabilityModel, x: np.ndarray, y: np.ndarray, chunk_size: int = None) -> float:
    """
    Total surprisal sum_k log2(1 / mu_k(f(k))) in bits

    :param model: Probability model
    :param x: Feature matrix
    :param y: True value indices
    :param chunk_size: Rows per inference batch
    :return: Surprisal in bits
    """
    total = 0.0
    for offset, probs in model.predict_chunked(x, chunk_size):
        labels = y[offset:offset + len(probs)]
        total += float(-np.log2(probs[np.arange(len(probs)), labels]).sum())
    return total


def expected_calibration_error(probs: np.ndarray, y: np.ndarray, bins: int = None) -> float:
    """
    Expected calibration error over equal-count confidence bins

    :param probs: Predicted distributions (n, classes)
    :param y: True value indices
    :param bins: Number of bins
    :return: ECE in [0, 1]
    """
    bins = bins or Config.ECE_BINS
    n = len(y)
    if n < bins:
        raise ValueError(f'ECE with {bins} bins requires at least {bins} samples, got {n}')
    confidence = probs.max(axis=1)
    correct = (probs.argmax(axis=1) == y).astype(np.float64)
    order = np.argsort(confidence, kind='stable')
    ece = 0.0
    for chunk in np.array_split(order, bins):
        ece += len(chunk) / n * abs(correct[chunk].mean() - confidence[chunk].mean())
    return float(ece)


def ece(model: ProbabilityModel, x: np.ndarray, y: np.ndarray, bins: int = None) -> float:
    """Expected calibration error of a model on labelled data"""
    probs = np.concatenate([p for _, p in model.predict_chunked(x)]) if len(x) else np.zeros((0, model.classes))
    return expected_calibration_error(probs, y, bins)


def accuracy(probs: np.ndarray, y: np.ndarray, k: int = 1) -> float:
    """
    Fraction of rows whose true value is among the k most probable values

    :param probs: Predicted distributions (n, classes)
    :param y: True value indices
    :param k: Number of top values that count as a hit
    :return: Top-k accuracy
    """
    if len(y) == 0:
        return math.nan
    if k == 1:
        return float((probs.argmax(axis=1) == y).mean())
    top = np.argsort(-probs, axis=1, kind='stable')[:, :k]
    return float((top == y[:, None]).any(axis=1).mean())
