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
Command-line front end: dataset generation, structure builds with space
reports, queries with verification and benchmarking, the weighted filter
overhead curves, and the query service.
"""

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from time import perf_counter

import numpy as np

from config import Config
from .build_job import build_dataset_structure, fit_dataset_model
from .coding import binary_entropy, optimal_bit_length, optimal_bit_length_real, space_cost
from .custom_types import ContainerError, LsfError, LsfMode, ModelName
from .datasets import Dataset, Schema, gen_gauss, load_csv, split, write_csv
from .lsf import Lsf, QueryStats
from .models import accuracy, expected_calibration_error

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2


def emit_report(report: dict, as_json: bool) -> None:
    """Prints a flat report as JSON object or as aligned key/value lines"""
    if as_json:
        print(json.dumps(report, indent=2, default=str))
        return
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f'{key:<{width}} : {value:.6f}' if isinstance(value, float) else f'{key:<{width}} : {value}')


def cmd_gen(args: argparse.Namespace) -> int:
    """Writes a gauss dataset and its schema sidecar"""
    ds = gen_gauss(args.n, classes=args.classes, sigma=args.sigma, spacing=args.spacing, seed=args.seed)
    write_csv(ds, args.out)
    logger.info(f'Wrote {ds.n} rows to {args.out} and schema to {Schema.sidecar_path(args.out)}')
    return EXIT_OK


def _predict_all(lsf_model, features: np.ndarray) -> np.ndarray:
    if len(features) == 0:
        return np.zeros((0, lsf_model.classes))
    return np.concatenate([p for _, p in lsf_model.predict_chunked(features)])


def cmd_build(args: argparse.Namespace) -> int:
    """Fits a model, builds and writes a structure, and reports its space"""
    ds = load_csv(args.data, Schema.load(args.schema) if args.schema else None)
    build_set, holdout_set = ds, None
    if args.holdout:
        build_set, holdout_set = split(ds, (1.0 - args.holdout, args.holdout), args.seed)
        logger.info(f'Holding out {holdout_set.n} of {ds.n} rows')

    model_name = ModelName(args.model)
    mode = LsfMode.CSF if (args.mode or ('csf' if model_name == ModelName.FREQ else 'learned')) == 'csf' else LsfMode.LEARNED
    logger.info(f'Fitting {model_name.value} model on {build_set.n} rows with {build_set.classes} values')
    model = fit_dataset_model(build_set, model_name, args.seed)
    lsf, seconds = build_dataset_structure(build_set, model, mode, args.seed)
    lsf.save(args.out)
    logger.info(f'Wrote structure to {args.out}')

    ledger = lsf.ledger()
    report = {
        'n': build_set.n,
        'classes': build_set.classes,
        'h0': build_set.h0(),
        'mode': mode.name.lower(),
        'model': model_name.value,
        'seed': args.seed,
        'construction_us_per_key': seconds * 1e6 / build_set.n if build_set.n else math.nan,
    }
    report.update(ledger.to_json())

    evaluation = holdout_set if holdout_set is not None else build_set
    probs = _predict_all(model, evaluation.features)
    report['accuracy'] = accuracy(probs, evaluation.labels)
    if evaluation.classes > 3:
        report['top3_accuracy'] = accuracy(probs, evaluation.labels, k=3)
    if evaluation.n >= Config.ECE_BINS:
        report['ece'] = expected_calibration_error(probs, evaluation.labels)
    if holdout_set is not None:
        report['holdout_accuracy'] = report['accuracy']

    if args.verify:
        answers = lsf.query_many(build_set.keys, build_set.features)
        mismatches = int((answers != build_set.labels).sum())
        report['verified_mismatches'] = mismatches

    emit_report(report, args.json)
    if args.verify and report['verified_mismatches']:
        logger.error(f'{report["verified_mismatches"]} keys answered incorrectly')
        return EXIT_VERIFICATION_FAILED
    return EXIT_OK


def run_bench(lsf: Lsf, ds: Dataset, queries: int, runs: int, threads: int, seed: int) -> dict:
    """
    Measures mean query time over repeated random key samples, and how much of
    the per-key work goes to model inference versus walking the structures

    :param lsf: Structure
    :param ds: Dataset whose keys are sampled
    :param queries: Sample size per run
    :param runs: Number of runs
    :param threads: Number of query threads
    :param seed: Sampling seed
    :return: Benchmark report
    """
    rng = np.random.default_rng(seed)
    timings = []
    mismatches = 0
    stats = QueryStats()
    for run in range(runs):
        sample = rng.integers(0, ds.n, size=queries)
        keys = [ds.keys[i] for i in sample.tolist()]
        features = ds.features[sample]

        start = perf_counter()
        if threads > 1:
            chunks = np.array_split(np.arange(queries), threads)
            thread_stats = [QueryStats() for _ in chunks]
            with ThreadPoolExecutor(max_workers=threads) as executor:
                parts = list(executor.map(lambda c, s: lsf.query_many([keys[i] for i in c.tolist()], features[c], stats=s),
                                          chunks, thread_stats))
            answers = np.concatenate(parts)
            for s in thread_stats:
                stats.merge(s)
        else:
            answers = lsf.query_many(keys, features, stats=stats)
        timings.append(perf_counter() - start)

        mismatches += int((answers != ds.labels[sample]).sum())
        logger.debug(f'Benchmark run {run + 1}/{runs}: {timings[-1] * 1e6 / queries:.3f} us/key')

    answered = queries * runs
    busy = stats.inference_seconds + stats.walk_seconds
    return {
        'bench_queries': queries,
        'bench_runs': runs,
        'bench_threads': threads,
        'query_us_per_key': float(np.mean(timings)) * 1e6 / queries,
        'inference_us_per_key': stats.inference_seconds * 1e6 / answered,
        'walk_us_per_key': stats.walk_seconds * 1e6 / answered,
        'inference_share': stats.inference_seconds / busy if busy > 0 else 0.0,
        'fast_path_rate': stats.fast_path / answered,
        'mismatches': mismatches,
    }


def cmd_query(args: argparse.Namespace) -> int:
    """Answers every row of a dataset, optionally verifying or benchmarking"""
    lsf = Lsf.load(args.structure)
    ds = load_csv(args.data, Schema.load(args.schema) if args.schema else None, scaler=lsf.scaler, value_names=lsf.value_names)

    if args.bench:
        report = run_bench(lsf, ds, args.queries, args.runs, args.threads, args.seed)
        emit_report(report, args.json)
        if report['mismatches']:
            logger.error(f'{report["mismatches"]} benchmark queries answered incorrectly')
            return EXIT_VERIFICATION_FAILED
        return EXIT_OK

    answers = lsf.query_many(ds.keys, ds.features)
    if args.verify:
        mismatches = int((answers != ds.labels).sum())
        emit_report({'n': ds.n, 'mismatches': mismatches, 'match_rate': 1.0 - mismatches / ds.n if ds.n else 1.0}, args.json)
        if mismatches:
            logger.error(f'{mismatches} of {ds.n} keys answered incorrectly')
            return EXIT_VERIFICATION_FAILED
        return EXIT_OK

    writer = csv.writer(sys.stdout, lineterminator='\n')
    for key, answer in zip(ds.keys, answers.tolist()):
        writer.writerow([key.decode(), lsf.value_names[answer]])
    return EXIT_OK


def figure4_rows(points: int) -> list[dict]:
    """
    Overhead of integer and real filter lengths over a grid of p in (0, 1/2]

    :param points: Grid size
    :return: One row per grid point
    """
    rows = []
    for i in range(1, points + 1):
        p = i / (2 * points)
        entropy = binary_entropy(p)
        space_real = space_cost(p, optimal_bit_length_real(p))
        space_int = space_cost(p, optimal_bit_length(p))
        rows.append({
            'p': p,
            'entropy': entropy,
            'space_real': space_real,
            'space_int': space_int,
            'overhead_real': space_real / entropy - 1.0,
            'overhead_int': space_int / entropy - 1.0,
        })
    return rows


def cmd_figure4(args: argparse.Namespace) -> int:
    """Writes the filter overhead curves as CSV"""
    rows = figure4_rows(args.points)
    out = open(args.out, 'w', encoding='utf-8', newline='') if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()

    worst_int = max(rows, key=lambda r: r['overhead_int'])
    worst_real = max(rows, key=lambda r: r['overhead_real'])
    logger.info(f'Integer lengths: maximum overhead {worst_int["overhead_int"]:.4f} at p = {worst_int["p"]:.4f}')
    logger.info(f'Real lengths: maximum overhead {worst_real["overhead_real"]:.4f} at p = {worst_real["p"]:.4f}')
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    """Runs the query service"""
    from . import query_service
    query_service.run(host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=Config.APP_NAME, description='Learned static functions')
    parser.add_argument('--version', action='version', version=f'{Config.APP_NAME} {Config.VERSION}')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', help='Generate a synthetic dataset')
    gen.add_argument('generator', choices=['gauss'])
    gen.add_argument('--n', type=int, default=1_000_000)
    gen.add_argument('--classes', type=int, default=8)
    gen.add_argument('--sigma', type=float, default=1.0)
    gen.add_argument('--spacing', type=float, default=2.0)
    gen.add_argument('--seed', type=int, default=Config.MASTER_SEED)
    gen.add_argument('--out', required=True)
    gen.set_defaults(handler=cmd_gen)

    build = commands.add_parser('build', help='Fit a model and build a structure')
    build.add_argument('--data', required=True)
    build.add_argument('--schema')
    build.add_argument('--model', choices=[m.value for m in ModelName], required=True)
    build.add_argument('--mode', choices=['learned', 'csf'])
    build.add_argument('--out', required=True)
    build.add_argument('--seed', type=int, default=Config.MASTER_SEED)
    build.add_argument('--holdout', type=float, default=0.0)
    build.add_argument('--verify', action='store_true')
    build.add_argument('--json', action='store_true')
    build.set_defaults(handler=cmd_build)

    query = commands.add_parser('query', help='Query a structure')
    query.add_argument('--structure', required=True)
    query.add_argument('--data', required=True)
    query.add_argument('--schema')
    query.add_argument('--verify', action='store_true')
    query.add_argument('--bench', action='store_true')
    query.add_argument('--queries', type=int, default=Config.BENCH_QUERIES)
    query.add_argument('--runs', type=int, default=Config.BENCH_RUNS)
    query.add_argument('--threads', type=int, default=1)
    query.add_argument('--seed', type=int, default=Config.MASTER_SEED)
    query.add_argument('--json', action='store_true')
    query.set_defaults(handler=cmd_query)

    figure4 = commands.add_parser('figure4', help='Write weighted filter overhead curves')
    figure4.add_argument('--points', type=int, default=1000)
    figure4.add_argument('--out')
    figure4.set_defaults(handler=cmd_figure4)

    serve = commands.add_parser('serve', help='Run the query service')
    serve.add_argument('--host', default=Config.SERVER_HOST)
    serve.add_argument('--port', type=int, default=Config.SERVER_PORT)
    serve.set_defaults(handler=cmd_serve)
    return parser


def validate_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Rejects flag values argparse cannot check on its own"""
    if args.command == 'gen':
        if args.n < 0:
            parser.error('--n must not be negative')
        if not args.sigma > 0:
            parser.error('--sigma must be positive')
        if args.classes < 1:
            parser.error('--classes must be positive')
    if args.command == 'build' and not 0.0 <= args.holdout < 1.0:
        parser.error('--holdout must be within [0, 1)')
    if args.command == 'query' and (args.queries < 1 or args.runs < 1 or args.threads < 1):
        parser.error('--queries, --runs and --threads must be positive')
    if args.command == 'figure4' and args.points < 1:
        parser.error('--points must be positive')


def main(argv: list[str] = None) -> int:
    """
    Parses arguments and dispatches to a command

    :param argv: Arguments without program name
    :return: Exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    validate_args(parser, args)

    try:
        return args.handler(args)
    except (OSError, ContainerError) as e:
        logger.error(f'{type(e).__name__}: {str(e)}')
        return EXIT_USAGE
    except (LsfError, ValueError) as e:
        logger.error(f'{type(e).__name__}: {str(e)}')
        return EXIT_USAGE


def run() -> None:
    """
    Runs the application
    :return: None
    """
    logging.basicConfig(encoding='utf-8', format='[%(asctime)s] | %(levelname)-8s | %(name)s | %(message)s', level=Config.LOG_LEVEL)
    logger.debug(f'Running {Config.APP_NAME} version {Config.VERSION} on log level {logging.getLevelName(Config.LOG_LEVEL)}')
    if Config.LOG_LEVEL == logging.DEBUG:
        logger.debug(Config.tostring())
    sys.exit(main())
