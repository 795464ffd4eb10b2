"""
Aggregation of stored runs into summary.csv / summary.pdf.
"""

import logging
import os

import pandas as pd

from ..database import ResultsDatabase
from ..errors import ReportError
from .pdf_exporter import GROUP_COLUMNS, PDFReportExporter

logger = logging.getLogger(__name__)

DB_NAME = "results.db"


def aggregate_metrics(frame: pd.DataFrame) -> pd.DataFrame:
    """Mean, sample std (ddof=1) and count per group of run name, mode, swept value and metric."""
    if frame.empty:
        return pd.DataFrame(columns=GROUP_COLUMNS + ["mean", "std", "count"])
    grouped = frame.groupby(GROUP_COLUMNS, dropna=False, sort=True)["value"]
    summary = grouped.agg(mean="mean", std=lambda v: v.std(ddof=1), count="count").reset_index()
    return summary


def write_summary(results_dir: str) -> dict:
    """Aggregate `<results_dir>/results.db` into summary.csv and summary.pdf."""
    db_path = os.path.join(results_dir, DB_NAME)
    if not os.path.isfile(db_path):
        raise ReportError(f"no results store at {db_path}")
    database = ResultsDatabase(db_path)
    database.initialize_database()
    frame = database.metrics_frame()
    summary = aggregate_metrics(frame)

    csv_path = os.path.join(results_dir, "summary.csv")
    try:
        summary.to_csv(csv_path, index=False)
    except OSError as e:
        raise ReportError(f"cannot write {csv_path}: {e}")

    pdf_path = os.path.join(results_dir, "summary.pdf")
    oracle = any(run.config.get("detection", {}).get("splitguard") or run.config.get("detection", {}).get("scrutinizer")
                 for run in database.get_runs())
    info = {"title": "Experiment Summary", "source": db_path, "label_oracle": oracle}
    if not PDFReportExporter().export_summary(summary, info, pdf_path):
        raise ReportError(f"cannot write {pdf_path}")
    logger.info("Aggregated %d runs into %s and %s", frame["run_id"].nunique() if not frame.empty else 0,
                csv_path, pdf_path)
    return {"summary.csv": csv_path, "summary.pdf": pdf_path}
