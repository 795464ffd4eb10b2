"""
Summary aggregation and the PDF / HTML exports.
"""

import numpy as np
import pandas as pd
import pytest

from src.database import ResultsDatabase
from src.errors import ReportError
from src.export import PDFReportExporter, aggregate_metrics, write_summary
from src.export.pdf_exporter import format_cell
from src.harness import MetricsReport


def long_frame(values, swept_value=None):
    return pd.DataFrame({
        "run_id": range(len(values)),
        "run_name": "defense_dp",
        "mode": "urvfl",
        "seed": range(len(values)),
        "swept_axis": "defense.dp_epsilon" if swept_value else None,
        "swept_value": swept_value,
        "metric": "recon_mse",
        "value": values,
    })


class TestAggregate:

    def test_mean_and_sample_std(self):
        summary = aggregate_metrics(long_frame([1.0, 2.0, 3.0]))
        row = summary.iloc[0]
        assert row["mean"] == pytest.approx(2.0)
        assert row["std"] == pytest.approx(1.0)
        assert row["count"] == 3

    def test_groups_by_swept_value(self):
        frame = pd.concat([long_frame([1.0, 3.0], "0.5"), long_frame([5.0, 7.0], "2.0")])
        summary = aggregate_metrics(frame)
        assert summary["swept_value"].tolist() == ["0.5", "2.0"]
        assert summary["mean"].tolist() == [2.0, 6.0]

    def test_single_seed_has_no_std(self):
        summary = aggregate_metrics(long_frame([4.0]))
        assert np.isnan(summary.iloc[0]["std"])

    def test_empty(self):
        summary = aggregate_metrics(long_frame([]))
        assert summary.empty
        assert {"mean", "std", "count"} <= set(summary.columns)


class TestExporter:

    def test_format_cell(self):
        assert format_cell(1.0, 0.5, 3) == "1.0000 ± 0.5000"
        assert format_cell(1.0, float("nan"), 1) == "1.0000"
        assert format_cell(float("nan"), 0.0, 2) == "n/a"

    def test_pdf_written(self, tmp_path):
        path = str(tmp_path / "summary.pdf")
        ok = PDFReportExporter().export_summary(aggregate_metrics(long_frame([1.0, 2.0])),
                                                {"title": "t", "label_oracle": True}, path)
        assert ok
        with open(path, "rb") as handle:
            assert handle.read(5) == b"%PDF-"

    def test_preview_lists_metrics(self):
        html = PDFReportExporter().preview_summary(aggregate_metrics(long_frame([1.0, 2.0], "0.5")), {})
        assert "recon_mse" in html
        assert "defense.dp_epsilon=0.5" in html


class TestWriteSummary:

    def test_summary_files(self, tmp_path):
        database = ResultsDatabase(str(tmp_path / "results.db"))
        database.initialize_database()
        for seed in range(3):
            database.add_run(MetricsReport("r", "urvfl", seed, {"detection": {"splitguard": False}},
                                           final={"recon_mse": float(seed)}))
        written = write_summary(str(tmp_path))
        summary = pd.read_csv(written["summary.csv"])
        assert summary.loc[0, "mean"] == pytest.approx(1.0)
        assert summary.loc[0, "count"] == 3
        assert (tmp_path / "summary.pdf").exists()

    def test_missing_store(self, tmp_path):
        with pytest.raises(ReportError):
            write_summary(str(tmp_path))
