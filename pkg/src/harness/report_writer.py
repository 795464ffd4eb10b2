"""
Per-run report files.

- report.jsonl: summary record first, then one record per round, distance
  sample and detection event. read_report() rebuilds an equal MetricsReport.
- trace.csv / distances.csv / detection.csv: one row per entry, fixed column
  order, header-only when empty.
- config.yaml: the configuration echo.
"""

import json
import logging
import os

import numpy as np
import pandas as pd
import yaml

from ..errors import ReportError
from .metrics import DETECTION_FIELDS, DISTANCE_FIELDS, TRACE_FIELDS, MetricsReport

logger = logging.getLogger(__name__)

FORMATS = ("jsonl", "csv")


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise ReportError(f"cannot create output directory {path}: {e}")
    if not os.access(path, os.W_OK):
        raise ReportError(f"output directory is not writable: {path}")


def _write_csv(rows: list, columns: tuple, path: str) -> None:
    frame = pd.DataFrame([{c: row.get(c) for c in columns} for row in rows], columns=list(columns))
    frame.to_csv(path, index=False)


def emit_report(report: MetricsReport, out_dir: str, formats=FORMATS) -> dict:
    """Write the report files into `out_dir`; returns {name: path}."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ReportError(f"unknown report format(s) {sorted(unknown)}; choose from {FORMATS}")
    _ensure_dir(out_dir)
    written = {}
    try:
        if "jsonl" in formats:
            path = os.path.join(out_dir, "report.jsonl")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(json.dumps({"record": "summary", **report.summary_record()}) + "\n")
                for kind, entries in (("round", report.rounds), ("distance", report.distances),
                                      ("detection", report.detection)):
                    for entry in entries:
                        handle.write(json.dumps({"record": kind, **entry}) + "\n")
            written["report.jsonl"] = path

        if "csv" in formats:
            for name, rows, columns in (("trace.csv", report.rounds, TRACE_FIELDS),
                                        ("distances.csv", report.distances, DISTANCE_FIELDS),
                                        ("detection.csv", report.detection, DETECTION_FIELDS)):
                path = os.path.join(out_dir, name)
                _write_csv(rows, columns, path)
                written[name] = path

        path = os.path.join(out_dir, "config.yaml")
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(report.config, handle, sort_keys=False)
        written["config.yaml"] = path
    except OSError as e:
        raise ReportError(f"cannot write report into {out_dir}: {e}")

    logger.info("Report for %s seed %d written to %s", report.run_name, report.seed, out_dir)
    return written


def read_report(path: str) -> MetricsReport:
    """Parse a report.jsonl back into a MetricsReport."""
    summary, lists = None, {"round": [], "distance": [], "detection": []}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            kind = record.pop("record")
            if kind == "summary":
                summary = record
            else:
                lists[kind].append(record)
    if summary is None:
        raise ReportError(f"{path} has no summary record")
    return MetricsReport(rounds=lists["round"], distances=lists["distance"],
                         detection=lists["detection"], **summary)


def write_embeddings(out_dir: str, encoder: np.ndarray, target: np.ndarray, labels: np.ndarray) -> dict:
    """Encoder and target-model embeddings with labels, for external visualization."""
    _ensure_dir(out_dir)
    written = {}
    for name, values in (("embeddings_encoder.csv", encoder), ("embeddings_target.csv", target)):
        frame = pd.DataFrame(values, columns=[f"e{i}" for i in range(values.shape[1])])
        frame.insert(0, "label", labels)
        path = os.path.join(out_dir, name)
        frame.to_csv(path, index=False)
        written[name] = path
    return written
