# Export package
from .pdf_exporter import PDFReportExporter
from .summary import aggregate_metrics, write_summary
