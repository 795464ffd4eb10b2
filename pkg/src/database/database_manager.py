"""
Results store for experiment runs

Handles:
- Database initialization (SQLite)
- Session management
- Recording finished runs with their final metrics
- Queries and a long-format metrics table for aggregation
"""

import logging
import math
import os

import pandas as pd
import yaml
from sqlalchemy import create_engine
from sqlalchemy.exc import SQLAlchemyError
from sqlalchemy.orm import Session, sessionmaker

from .db_models import Base, FinalMetric, RunRecord

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["run_id", "run_name", "mode", "seed", "swept_axis", "swept_value", "metric", "value"]


def _yaml_text(value) -> str:
    """One-line YAML for a swept value, without the end-of-document marker."""
    return yaml.safe_dump(value, default_flow_style=True).replace("\n...", "").strip()


class ResultsDatabase:
    """Manages the SQLite results store."""

    def __init__(self, db_path: str = "results.db"):
        self.db_path = db_path
        self.engine = None
        self.SessionLocal = None
        self._initialize_engine()

    # ---------------------------------------------------------------------
    # INITIALIZATION
    # ---------------------------------------------------------------------
    def _initialize_engine(self):
        try:
            directory = os.path.dirname(os.path.abspath(self.db_path))
            os.makedirs(directory, exist_ok=True)
            self.engine = create_engine(
                f"sqlite:///{self.db_path}",
                echo=False,
                connect_args={"check_same_thread": False},
            )
            self.SessionLocal = sessionmaker(bind=self.engine, autocommit=False, autoflush=False,
                                             expire_on_commit=False)
        except Exception as e:
            raise RuntimeError(f"Error initializing database engine: {e}")

    def initialize_database(self):
        """Create tables if missing."""
        try:
            Base.metadata.create_all(bind=self.engine)
        except SQLAlchemyError as e:
            raise RuntimeError(f"Error initializing database: {e}")

    def get_session(self) -> Session:
        return self.SessionLocal()

    # ---------------------------------------------------------------------
    # CREATE
    # ---------------------------------------------------------------------
    def add_run(self, report, run_dir: str = None, swept_axis: str = None, swept_value=None) -> int:
        """Store a MetricsReport's summary and final metrics; returns the run id."""
        try:
            with self.get_session() as session:
                run = RunRecord(
                    run_name=report.run_name,
                    mode=report.mode,
                    seed=report.seed,
                    swept_axis=swept_axis,
                    swept_value=None if swept_axis is None else _yaml_text(swept_value),
                    run_dir=run_dir,
                    wall_clock_seconds=report.wall_clock_seconds,
                    detected_rounds=report.detected_rounds,
                    config=report.config,
                )
                for name, value in report.final.items():
                    stored = None if value is None or not math.isfinite(value) else float(value)
                    run.metrics.append(FinalMetric(name=name, value=stored))
                session.add(run)
                session.commit()
                return run.id
        except SQLAlchemyError as e:
            raise RuntimeError(f"Error recording run {report.run_name} seed {report.seed}: {e}")

    # ---------------------------------------------------------------------
    # GETTERS
    # ---------------------------------------------------------------------
    def get_runs(self, run_name: str = None, mode: str = None) -> list[RunRecord]:
        with self.get_session() as session:
            q = session.query(RunRecord)
            if run_name:
                q = q.filter(RunRecord.run_name == run_name)
            if mode:
                q = q.filter(RunRecord.mode == mode)
            return q.order_by(RunRecord.id).all()

    def get_metrics(self, run_id: int) -> dict:
        with self.get_session() as session:
            rows = session.query(FinalMetric).filter(FinalMetric.run_id == run_id).all()
            return {row.name: row.value for row in rows}

    def metrics_frame(self) -> pd.DataFrame:
        """One row per (run, metric)."""
        with self.get_session() as session:
            rows = (
                session.query(RunRecord, FinalMetric)
                .join(FinalMetric, FinalMetric.run_id == RunRecord.id)
                .order_by(RunRecord.id, FinalMetric.id)
                .all()
            )
            records = [
                [run.id, run.run_name, run.mode, run.seed, run.swept_axis, run.swept_value, metric.name, metric.value]
                for run, metric in rows
            ]
        return pd.DataFrame(records, columns=METRIC_COLUMNS)

    # ---------------------------------------------------------------------
    # DELETE
    # ---------------------------------------------------------------------
    def delete_run(self, run_id: int) -> bool:
        try:
            with self.get_session() as session:
                run = session.get(RunRecord, run_id)
                if run:
                    session.delete(run)
                    session.commit()
                    return True
                return False
        except SQLAlchemyError:
            return False

    def clear(self) -> int:
        """Delete every run; returns how many were removed."""
        try:
            with self.get_session() as session:
                runs = session.query(RunRecord).all()
                for run in runs:
                    session.delete(run)
                session.commit()
                return len(runs)
        except SQLAlchemyError as e:
            raise RuntimeError(f"Error clearing results: {e}")
