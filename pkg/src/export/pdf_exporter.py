"""
PDF Exporter for aggregated experiment summaries
Generates a PDF table and an HTML preview of mean ± std per run group.
"""

import logging
from datetime import datetime
from typing import Dict

import pandas as pd
from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4, landscape
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

logger = logging.getLogger(__name__)

GROUP_COLUMNS = ["run_name", "mode", "swept_axis", "swept_value", "metric"]


def format_cell(mean: float, std: float, count: int) -> str:
    if pd.isna(mean):
        return "n/a"
    if count < 2 or pd.isna(std):
        return f"{mean:.4f}"
    return f"{mean:.4f} ± {std:.4f}"


class PDFReportExporter:
    """Handles summary export to PDF and HTML preview."""

    def __init__(self):
        self.page_width, self.page_height = landscape(A4)
        self.margin = 0.6 * inch
        self.header_color = colors.HexColor("#1e3a8a")
        self.stripe_color = colors.HexColor("#f1f5f9")

    # ---------------------------------------------------------
    # PUBLIC METHODS
    # ---------------------------------------------------------
    def export_summary(self, summary: pd.DataFrame, info: Dict, output_path: str) -> bool:
        """Export a summary table (output of aggregate_metrics) as a PDF file."""
        try:
            doc = SimpleDocTemplate(
                output_path,
                pagesize=landscape(A4),
                leftMargin=self.margin,
                rightMargin=self.margin,
                topMargin=self.margin,
                bottomMargin=self.margin,
            )
            story = []
            story += self._create_header(info)
            story.append(Spacer(1, 0.2 * inch))
            story.append(self._create_table(summary))
            story.append(Spacer(1, 0.3 * inch))
            story += self._create_footer(info)
            doc.build(story)
            return True
        except Exception as e:
            logger.error("PDF export failed: %s", e)
            return False

    def preview_summary(self, summary: pd.DataFrame, info: Dict) -> str:
        """Generate a simple HTML preview of the summary table."""
        rows = self._table_rows(summary)
        head = "".join(f"<th>{c}</th>" for c in rows[0])
        body = "".join("<tr>" + "".join(f"<td>{c}</td>" for c in row) + "</tr>" for row in rows[1:])
        return f"""
        <!DOCTYPE html>
        <html>
        <head>
            <meta charset="UTF-8">
            <title>{info.get('title', 'Experiment Summary')}</title>
            <style>
                body {{ font-family: Arial, sans-serif; padding: 20px; }}
                table {{ border-collapse: collapse; width: 100%; }}
                th, td {{ border: 1px solid #475569; padding: 6px; text-align: center; }}
                th {{ background-color: #1e3a8a; color: #f8fafc; }}
            </style>
        </head>
        <body>
            <h2>{info.get('title', 'Experiment Summary')}</h2>
            <p>Generated on {datetime.now().strftime('%B %d, %Y at %I:%M %p')}</p>
            <table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>
        </body>
        </html>
        """

    # ---------------------------------------------------------
    # INTERNAL UTILITIES
    # ---------------------------------------------------------
    def _create_header(self, info: Dict):
        styles = getSampleStyleSheet()
        title = ParagraphStyle(
            "Title", parent=styles["Heading1"],
            fontSize=18, textColor=self.header_color, alignment=TA_CENTER
        )
        subtitle = ParagraphStyle(
            "Sub", parent=styles["Normal"],
            fontSize=10, alignment=TA_CENTER, spaceAfter=6
        )
        return [
            Paragraph(info.get("title", "Experiment Summary"), title),
            Paragraph(f"Source: {info.get('source', '')}", subtitle),
            Paragraph(datetime.now().strftime("Generated on %B %d, %Y, %I:%M %p"), subtitle),
        ]

    def _create_footer(self, info: Dict):
        styles = getSampleStyleSheet()
        style = ParagraphStyle(
            "Footer", parent=styles["Normal"],
            fontSize=8, textColor=colors.gray, alignment=TA_CENTER
        )
        note = "Values are mean ± sample standard deviation over seeds."
        if info.get("label_oracle"):
            note += " Detection scores used an oracle label channel."
        return [Paragraph(note, style)]

    def _table_rows(self, summary: pd.DataFrame) -> list:
        header = ["Run", "Mode", "Swept", "Metric", "Value", "Seeds"]
        rows = [header]
        for _, row in summary.iterrows():
            swept = "" if pd.isna(row["swept_axis"]) else f"{row['swept_axis']}={row['swept_value']}"
            rows.append([row["run_name"], row["mode"], swept, row["metric"],
                         format_cell(row["mean"], row["std"], int(row["count"])), str(int(row["count"]))])
        return rows

    def _create_table(self, summary: pd.DataFrame):
        data = self._table_rows(summary)
        table = Table(data, repeatRows=1)
        style = TableStyle([
            ('GRID', (0, 0), (-1, -1), 0.5, colors.black),
            ('BACKGROUND', (0, 0), (-1, 0), self.header_color),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.white),
            ('ALIGN', (0, 0), (-1, -1), 'CENTER'),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
        ])
        for r in range(2, len(data), 2):
            style.add('BACKGROUND', (0, r), (-1, r), self.stripe_color)
        table.setStyle(style)
        return table
