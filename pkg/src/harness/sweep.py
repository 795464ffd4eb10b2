"""
Multi-run execution: every seed of a config, and parameter sweeps that cross
values with seeds. Runs are independent and may fan out over processes; each
writes only its own directory, and the parent process records results in the
SQLite store.
"""

import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor

import yaml
from tqdm import tqdm

from ..database import ResultsDatabase
from ..errors import ConfigError, ContractError
from .calibration import freeze_thresholds
from .config import ExperimentConfig, config_diff, resolve_path, with_override
from .experiment import Experiment

logger = logging.getLogger(__name__)

DB_NAME = "results.db"


def _label(value) -> str:
    text = yaml.safe_dump(value, default_flow_style=True).strip().replace("\n...", "")
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", text).strip("_") or "value"


def run_dir_for(output_dir: str, name: str, seed: int, axis: str = None, value=None) -> str:
    parts = [output_dir, name]
    if axis is not None:
        parts.append(f"{axis}={_label(value)}")
    parts.append(f"seed_{seed}")
    return os.path.join(*parts)


def _execute(job):
    config, seed, run_dir = job
    return Experiment(config, seed, run_dir).run()


def _run_jobs(jobs: list, workers: int, description: str) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(tqdm(pool.map(_execute, jobs), total=len(jobs), desc=description))
    return [_execute(job) for job in tqdm(jobs, desc=description)]


def _store(output_dir: str) -> ResultsDatabase:
    database = ResultsDatabase(os.path.join(output_dir, DB_NAME))
    database.initialize_database()
    return database


def run_all(config: ExperimentConfig, output_dir: str = None, workers: int = 1) -> list:
    """Every configured seed; reports are written per run and recorded in results.db."""
    config = freeze_thresholds(config.validate())
    output_dir = output_dir or config.output_dir
    jobs = [(config, seed, run_dir_for(output_dir, config.name, seed)) for seed in config.seeds]
    reports = _run_jobs(jobs, workers, config.name)
    database = _store(output_dir)
    for (_, _, run_dir), report in zip(jobs, reports):
        database.add_run(report, run_dir)
    return reports


def sweep(config: ExperimentConfig, axis: str, values: list, output_dir: str = None, workers: int = 1) -> list:
    """One report per (value, seed); configs differ only along `axis`."""
    if not values:
        raise ConfigError("a sweep needs at least one value")
    resolve_path(config.to_dict(), axis)

    variants, errors = [], []
    for value in values:
        try:
            variants.append((value, with_override(config, axis, value).validate()))
        except ConfigError as e:
            errors += [f"{axis}={value}: {message}" for message in e.errors]
    if errors:
        raise ConfigError(errors)

    # one calibration for the whole sweep
    config = freeze_thresholds(config)
    variants = [(value, with_override(config, axis, value).validate()) for value, _ in variants]

    output_dir = output_dir or config.output_dir
    jobs, meta = [], []
    for value, variant in variants:
        for seed in variant.seeds:
            jobs.append((variant, seed, run_dir_for(output_dir, config.name, seed, axis, value)))
            meta.append(value)
    reports = _run_jobs(jobs, workers, f"{config.name} sweep {axis}")

    base = config.to_dict()
    for report in reports:
        extra = [path for path in config_diff(base, report.config) if path != axis]
        if extra:
            raise ContractError(f"sweep configs differ outside {axis}: {extra}")

    database = _store(output_dir)
    for (_, _, run_dir), value, report in zip(jobs, meta, reports):
        database.add_run(report, run_dir, swept_axis=axis, swept_value=value)
    logger.info("Sweep over %s finished: %d values x %d seeds", axis, len(values), len(config.seeds))
    return reports
