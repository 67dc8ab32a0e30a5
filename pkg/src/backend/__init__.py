"""
Backend services for instance files, experiments and reports
"""

from .experiment_runner import ExperimentRunner, format_report
from .pdf_generator import PDFReportGenerator

__all__ = ["ExperimentRunner", "PDFReportGenerator", "format_report"]
