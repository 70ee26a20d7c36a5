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
import threading
from time import perf_counter
from typing import Callable, Dict
from uuid import UUID

from config import Config
from .custom_types import BuildRequest, JobStatus, LsfConfig, LsfMode, ModelName
from .datasets import Dataset, Schema, load_csv
from .lsf import Lsf
from .models import LrHyper, ProbabilityModel, fit_model


def fit_dataset_model(ds: Dataset, model: ModelName, seed: int) -> ProbabilityModel:
    """
    Fits a model on all rows of a dataset

    :param ds: Dataset
    :param model: Model name
    :param seed: Master seed, used for the LR shuffle
    :return: Fitted model
    """
    return fit_model(model, ds.features, ds.labels, ds.classes, LrHyper(seed=seed))


def build_dataset_structure(ds: Dataset, model: ProbabilityModel, mode: LsfMode, seed: int) -> tuple[Lsf, float]:
    """
    Builds the structure of a dataset with a fitted model

    :param ds: Dataset
    :param model: Fitted model
    :param mode: Coding mode
    :param seed: Master seed
    :return: Tuple (structure, construction seconds)
    """
    start = perf_counter()
    lsf = Lsf.build(ds.keys, ds.features, ds.labels, model, ds.value_names, LsfConfig(seed=seed, mode=mode), scaler=ds.scaler)
    return lsf, perf_counter() - start


def structure_path(name: str) -> str:
    """Location of a named structure inside the structure directory"""
    return os.path.join(Config.STRUCTURE_DIR, f'{name}.lsf')


class BuildJob:
    """
    A single build job that is processed by the query service worker
    """

    def __init__(self, jobid: UUID, request: BuildRequest, on_finished: Callable[[str, Lsf], None] = None):
        self.id = jobid
        self.status = JobStatus.UNINITIALIZED
        self.statusextras = None
        self.request = request
        self.on_finished = on_finished
        self.logger = logging.getLogger(f"{__name__}::<{self.id}>")

    def __eq__(self, other):
        if isinstance(other, self.__class__):
            return self.id == other.id
        elif isinstance(other, str):
            try:
                return self.id == UUID(other)
            except ValueError:
                return False
        else:
            return False

    def to_json(self) -> dict:
        """
        Returns a JSON serializable representation of this job

        :return: JSON serializable representation of this job
        """
        return {
            'id': self.id,
            'name': self.request.name,
            'status': self.status,
            'statusextras': self.statusextras,
        }

    def get_id(self) -> UUID:
        return self.id

    def get_status(self) -> JobStatus:
        return self.status

    def get_statusextras(self) -> Dict:
        return self.statusextras

    def set_status(self, status: JobStatus, statusextras: Dict = None) -> None:
        """
        Updates the status of this job

        :param status: New job status
        :param statusextras: Additional status information
        :return: None
        """
        self.status = status
        self.statusextras = statusextras
        self.logger.debug(f'Status changed to {status}')

    @staticmethod
    def _check_stop() -> None:
        stop_requested = getattr(threading.current_thread(), 'stop_requested', None)
        if stop_requested is not None and stop_requested():
            raise InterruptedError('Thread stop requested')

    def execute(self) -> None:
        """
        Executes this job

        :return: None
        """
        self.logger.info(f"Processing job {self.id}")

        try:
            # Load data and fit the model
            self.set_status(JobStatus.TRAINING)
            schema = Schema.load(self.request.schema) if self.request.schema else None
            ds = load_csv(self.request.data, schema)
            self._check_stop()
            model = fit_dataset_model(ds, ModelName(self.request.model), self.request.seed)
            self._check_stop()

            # Build and persist the structure
            self.set_status(JobStatus.BUILDING)
            mode = LsfMode.CSF if self.request.mode == 'csf' else LsfMode.LEARNED
            lsf, seconds = build_dataset_structure(ds, model, mode, self.request.seed)
            self._check_stop()

            path = structure_path(self.request.name)
            lsf.save(path)
            self.logger.info(f'Wrote structure "{self.request.name}" to {path}')
            if self.on_finished:
                self.on_finished(self.request.name, lsf)

            ledger = lsf.ledger()
            statusextras = {
                'n': ds.n,
                'classes': ds.classes,
                'bits_per_key': ledger.per_key(ledger.total_bits),
                'surprisal_per_key': ledger.per_key(ledger.surprisal_bits),
                'construction_us_per_key': seconds * 1e6 / ds.n if ds.n else None,
            }
        except InterruptedError:
            self.logger.warning(f'Job termination requested. Terminated gracefully.')
            self.set_status(JobStatus.TIMEOUT)
            return
        except Exception as e:
            self.logger.error(f"Job failed with error: {type(e).__name__}: {str(e)}")
            self.set_status(JobStatus.FAILED, statusextras={'error': f'{type(e).__name__}: {str(e)}'})
            return

        self.set_status(JobStatus.FINISHED, statusextras=statusextras)
        self.logger.info(f"Finished job {self.id}")
