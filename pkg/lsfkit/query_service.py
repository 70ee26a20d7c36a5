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
HTTP service around built structures. Build jobs are queued and processed one
at a time by a background worker; finished structures are kept in memory and
answer query batches from all request threads.
"""

import os
import queue
import threading
import uuid
from collections import deque
from http import HTTPStatus

import numpy as np
import waitress
from flask import Flask, jsonify, make_response, request

from config import Config
from .build_job import BuildJob, structure_path
from .custom_types import BuildRequest, ContainerError, JobStatus, LsfMode, WorkerStatus, WorkerThreadInterrupter, is_valid_structure_name
from .lsf import Lsf

app = Flask(__name__)


class JobThread(threading.Thread):
    """
    Runs a single build job. The job polls `stop_requested()` between its
    phases and ends with status TIMEOUT once a stop was requested.
    """

    def __init__(self, job: BuildJob):
        super().__init__(target=job.execute, name=f'build-{job.get_id()}', daemon=True)
        self.job = job
        self._stop_event = threading.Event()

    def stop(self) -> None:
        self._stop_event.set()

    def stop_requested(self) -> bool:
        return self._stop_event.is_set()


class BuildWorker:
    """
    Bounded queue of build jobs, processed one after another by a background
    thread, and a bounded history of submitted jobs for status lookups
    """

    def __init__(self, queue_size: int, history_size: int):
        self.jobs = queue.Queue(maxsize=queue_size)
        self.history = deque(maxlen=history_size)
        self.current: BuildJob | None = None
        self._thread: threading.Thread | None = None

    def submit(self, job: BuildJob) -> bool:
        """
        Enqueues a job

        :param job: Job to run
        :return: False if the queue is full
        """
        try:
            self.jobs.put_nowait(job)
        except queue.Full:
            return False
        self.history.append(job)
        job.set_status(JobStatus.AWAITING_PROCESSING)
        return True

    def find(self, jobid: str) -> BuildJob | None:
        """Job with the given id from the history"""
        return next((job for job in self.history if job == jobid), None)

    def status(self) -> WorkerStatus:
        if self.jobs.full():
            return WorkerStatus.BUSY
        if self.jobs.empty() and self.current is None:
            return WorkerStatus.IDLE
        return WorkerStatus.ACTIVE

    def is_running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self) -> None:
        """Starts the background thread unless it is already running"""
        if self.is_running():
            return
        self._thread = threading.Thread(target=self._process, name='build-worker', daemon=True)
        self._thread.start()

    def stop(self) -> None:
        """Drops all queued jobs and stops the background thread after its current job"""
        self.jobs.queue.clear()
        if self.is_running():
            self.jobs.put(WorkerThreadInterrupter())
            self._thread.join()
        self._thread = None

    def reset(self) -> None:
        """Stops processing and forgets all jobs"""
        self.stop()
        self.history.clear()
        self.current = None

    def _process(self) -> None:
        app.logger.info('Build worker started')
        while True:
            job = self.jobs.get()
            if isinstance(job, WorkerThreadInterrupter):
                app.logger.info('Build worker stopped')
                return

            self.current = job
            runner = JobThread(job)
            runner.start()
            runner.join(Config.REQUEST_TIMEOUT_SEC)
            if runner.is_alive():
                app.logger.warning(f'Build of "{job.request.name}" ({job.get_id()}) exceeded {Config.REQUEST_TIMEOUT_SEC} seconds, stopping after its current phase')
                runner.stop()
                runner.join()
            self.current = None


class StructureCache:
    """
    Structures by name. Structures written by earlier runs are loaded from
    the structure directory on first use.
    """

    def __init__(self):
        self._structures: dict[str, Lsf] = {}
        self._lock = threading.Lock()

    def register(self, name: str, lsf: Lsf) -> None:
        """Makes a structure available, replacing an older one of the same name"""
        with self._lock:
            self._structures[name] = lsf

    def get(self, name: str) -> Lsf | None:
        """
        Looks up a structure

        :param name: Structure name
        :return: Structure or None if it neither is cached nor exists on disk
        :raises ContainerError: If the file on disk is damaged
        """
        with self._lock:
            if name not in self._structures:
                path = structure_path(name)
                if not os.path.isfile(path):
                    return None
                self._structures[name] = Lsf.load(path)
                app.logger.info(f'Loaded structure "{name}" from {path}')
            return self._structures[name]

    def names(self) -> list[str]:
        with self._lock:
            return sorted(self._structures)

    def describe(self) -> list[dict]:
        """Size and shape of every loaded structure"""
        with self._lock:
            entries = sorted(self._structures.items())
        described = []
        for name, lsf in entries:
            ledger = lsf.ledger()
            described.append({
                'name': name,
                'mode': lsf.mode.name.lower(),
                'n': lsf.n,
                'classes': lsf.classes,
                'bits_per_key': ledger.per_key(ledger.total_bits),
                'surprisal_per_key': ledger.per_key(ledger.surprisal_bits),
            })
        return described

    def clear(self) -> None:
        with self._lock:
            self._structures.clear()

    def __contains__(self, name: str) -> bool:
        with self._lock:
            return name in self._structures


worker = BuildWorker(queue_size=Config.QUEUE_SIZE, history_size=Config.HISTORY_SIZE)
structure_cache = StructureCache()


def error_response(message: str, status: HTTPStatus):
    return make_response(jsonify({'error': message}), status)


@app.get('/')
def handle_index():
    return jsonify({
        'app': Config.APP_NAME,
        'version': Config.VERSION,
        'structure_dir': os.path.abspath(Config.STRUCTURE_DIR),
    }), HTTPStatus.OK


@app.get('/version')
def handle_version():
    return jsonify({'version': Config.VERSION}), HTTPStatus.OK


@app.get('/status')
def handle_status():
    current = worker.current
    return jsonify({
        'status': worker.status(),
        'queue_len': worker.jobs.qsize(),
        'current_job': current.to_json() if current is not None else None,
        'structures': structure_cache.names(),
    }), HTTPStatus.OK


@app.get('/status/<string:jobid>')
def handle_job_status(jobid):
    job = worker.find(jobid)
    if job is None:
        return error_response(f"Job with requested jobid '{jobid}' was not found", HTTPStatus.NOT_FOUND)
    return jsonify(job.to_json()), HTTPStatus.OK


@app.get('/structures')
def handle_structures():
    return jsonify({'structures': structure_cache.describe()}), HTTPStatus.OK


@app.post('/build')
def handle_build_request():
    if not request.is_json:
        return error_response('Request must be JSON.', HTTPStatus.BAD_REQUEST)

    try:
        build_request = BuildRequest.from_json(request.get_json())
    except TypeError as e:
        app.logger.debug(f'Incomplete build request: {str(e)}')
        return error_response('JSON is technically incomplete or missing a required parameter.', HTTPStatus.BAD_REQUEST)
    except ValueError as e:
        app.logger.debug(f'Invalid build request: {str(e)}')
        return error_response(f'JSON data is invalid: {str(e)}', HTTPStatus.BAD_REQUEST)

    if not os.path.isfile(build_request.data):
        return error_response(f'Dataset "{build_request.data}" does not exist.', HTTPStatus.BAD_REQUEST)

    job = BuildJob(uuid.uuid1(), build_request, on_finished=structure_cache.register)
    if not worker.submit(job):
        app.logger.warning(f'Rejected build of "{build_request.name}" from {request.remote_addr}: queue full')
        return error_response('Maximum number of queued jobs exceeded.', HTTPStatus.TOO_MANY_REQUESTS)

    app.logger.info(f'Enqueued build of "{build_request.name}" as job {job.get_id()} from {request.remote_addr}')
    return jsonify({'jobid': job.get_id(), 'status': job.get_status()}), HTTPStatus.OK


@app.post('/query/<string:name>')
def handle_query_request(name):
    if not is_valid_structure_name(name):
        return error_response(f"Invalid structure name '{name}'", HTTPStatus.BAD_REQUEST)
    if not request.is_json:
        return error_response('Request must be JSON.', HTTPStatus.BAD_REQUEST)

    payload = request.get_json()
    rows = payload.get('rows') if isinstance(payload, dict) else None
    if not isinstance(rows, list) or not all(isinstance(r, dict) and 'key' in r for r in rows):
        return error_response('Request must contain a list "rows" of objects with a "key".', HTTPStatus.BAD_REQUEST)
    if len(rows) > Config.QUERY_BATCH_LIMIT:
        return error_response(f'At most {Config.QUERY_BATCH_LIMIT} rows per request are allowed.', HTTPStatus.BAD_REQUEST)

    try:
        lsf = structure_cache.get(name)
    except ContainerError as e:
        app.logger.error(f'Structure "{name}" could not be loaded: {type(e).__name__}: {str(e)}')
        return error_response(f"Structure '{name}' is damaged", HTTPStatus.INTERNAL_SERVER_ERROR)
    if lsf is None:
        return error_response(f"Structure '{name}' was not found", HTTPStatus.NOT_FOUND)

    keys = [str(r['key']).encode() for r in rows]
    try:
        if lsf.mode == LsfMode.CSF or lsf.scaler is None:
            features = np.zeros((len(rows), lsf.model.dim))
        else:
            features = lsf.scaler.transform(lsf.scaler.table_from_rows(rows))
        indices = lsf.query_many(keys, features)
    except (KeyError, ValueError) as e:
        return error_response(f'Invalid query rows: {str(e)}', HTTPStatus.BAD_REQUEST)

    return jsonify({'values': [lsf.value_names[i] for i in indices.tolist()]}), HTTPStatus.OK


def start_processing_thread() -> None:
    """Starts the build worker thread"""
    worker.start()


def run(host: str = None, port: int = None) -> None:
    """
    Runs the query service. Logging must be configured by the caller.

    :param host: Interface to bind to
    :param port: Port to listen on
    :return: None
    """
    app.logger.info(f'Running {Config.APP_NAME} query service version {Config.VERSION}, structures in {os.path.abspath(Config.STRUCTURE_DIR)}')
    start_processing_thread()
    waitress.serve(app, host=host or Config.SERVER_HOST, port=port or Config.SERVER_PORT)
