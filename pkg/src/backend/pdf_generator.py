"""
PDF Report Generator
Renders experiment reports: title page with run metadata, one section of
checks, findings and notes, and the run transcripts in an appendix
"""

import json
import logging
from datetime import datetime
from typing import Any, Dict, List
from xml.sax.saxutils import escape

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_JUSTIFY
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import (
    PageBreak,
    Paragraph,
    Preformatted,
    SimpleDocTemplate,
    Spacer,
    Table,
    TableStyle,
)

from backend.experiment_runner import check_mark

logger = logging.getLogger(__name__)


class PDFReportGenerator:
    """Generate PDF reports for experiment runs"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _escape_text(self, text: Any) -> str:
        """Escape text for a ReportLab Paragraph, keeping line breaks"""
        if text is None:
            return ""
        text = str(text).replace("–", "-").replace("—", "-").replace("−", "-")
        return escape(text).replace("\n", "<br/>")

    def _setup_custom_styles(self):
        """Setup custom paragraph styles"""
        self.styles.add(ParagraphStyle(
            name='CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=20,
            textColor=colors.HexColor('#1e3a8a'),
            spaceAfter=30,
            alignment=TA_CENTER,
            fontName='Helvetica-Bold'
        ))

        self.styles.add(ParagraphStyle(
            name='SectionHeading',
            parent=self.styles['Heading2'],
            fontSize=14,
            textColor=colors.HexColor('#1e40af'),
            spaceAfter=12,
            spaceBefore=20,
            fontName='Helvetica-Bold'
        ))

        self.styles.add(ParagraphStyle(
            name='BodyJustify',
            parent=self.styles['BodyText'],
            fontSize=10,
            alignment=TA_JUSTIFY,
            spaceAfter=10
        ))

        self.styles.add(ParagraphStyle(
            name='CellText',
            parent=self.styles['BodyText'],
            fontSize=8,
            leading=10
        ))

    def generate_report(self, output_path: str, report: Dict[str, Any]) -> str:
        """
        Generate the PDF for one experiment report

        Args:
            output_path: Path to save PDF
            report: Report dictionary from ExperimentRunner.run

        Returns:
            Path to generated PDF
        """
        doc = SimpleDocTemplate(
            output_path,
            pagesize=A4,
            rightMargin=72,
            leftMargin=72,
            topMargin=72,
            bottomMargin=72
        )

        story = []
        story.extend(self._build_title_page(report))
        story.append(PageBreak())
        story.extend(self._build_checks(report))

        if report.get("transcripts"):
            story.append(PageBreak())
            story.extend(self._build_appendix_transcripts(report["transcripts"]))

        doc.build(story)
        logger.info("[EXPERIMENT] PDF report written to %s", output_path)
        return output_path

    def _build_title_page(self, report: Dict[str, Any]) -> List:
        elements = []
        elements.append(Spacer(1, 2*inch))
        elements.append(Paragraph(
            self._escape_text(report.get("title", report["experiment"]).upper()),
            self.styles['CustomTitle']
        ))
        elements.append(Spacer(1, 0.5*inch))

        meta = report.get("meta", {})
        passed = sum(check["passed"] for check in report["checks"])
        known = sum(check_mark(check) == "KNOWN" for check in report["checks"])
        run_info = [
            ["Experiment:", report["experiment"]],
            ["Checks Passed:", f"{passed} of {len(report['checks'])}" + (f" ({known} known)" if known else "")],
            ["Tie-break:", str(meta.get("tiebreak"))],
            ["Ordering:", str(meta.get("ordering"))],
            ["Seed:", str(meta.get("seed"))],
            ["Instance SHA-256:", str(meta.get("instance_sha256", ""))[:32] + "..."],
            ["Engine Version:", str(meta.get("version"))],
            ["Report Generated:", datetime.now().strftime("%B %d, %Y at %H:%M")],
        ]

        table = Table(run_info, colWidths=[2.0*inch, 4.0*inch])
        table.setStyle(TableStyle([
            ('FONT', (0, 0), (-1, -1), 'Helvetica', 10),
            ('FONT', (0, 0), (0, -1), 'Helvetica-Bold', 10),
            ('TEXTCOLOR', (0, 0), (0, -1), colors.HexColor('#1e40af')),
            ('ALIGN', (0, 0), (0, -1), 'RIGHT'),
            ('ALIGN', (1, 0), (1, -1), 'LEFT'),
            ('VALIGN', (0, 0), (-1, -1), 'MIDDLE'),
            ('TOPPADDING', (0, 0), (-1, -1), 8),
            ('BOTTOMPADDING', (0, 0), (-1, -1), 8),
        ]))
        elements.append(table)
        return elements

    def _build_checks(self, report: Dict[str, Any]) -> List:
        elements = []
        elements.append(Paragraph("CHECKS", self.styles['SectionHeading']))

        cell = self.styles['CellText']
        rows = [["Check", "Expected", "Observed", "Result"]]
        for check in report["checks"]:
            rows.append([
                Paragraph(self._escape_text(check["name"]), cell),
                Paragraph(self._escape_text(check["expected"]), cell),
                Paragraph(self._escape_text(check["observed"]), cell),
                check_mark(check),
            ])

        table = Table(rows, colWidths=[2.4*inch, 1.5*inch, 1.5*inch, 0.6*inch], repeatRows=1)
        style = [
            ('FONT', (0, 0), (-1, 0), 'Helvetica-Bold', 9),
            ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#dbeafe')),
            ('GRID', (0, 0), (-1, -1), 0.5, colors.HexColor('#9ca3af')),
            ('VALIGN', (0, 0), (-1, -1), 'TOP'),
        ]
        for row, check in enumerate(report["checks"], start=1):
            color = {"PASS": "#15803d", "KNOWN": "#b45309"}.get(check_mark(check), "#b91c1c")
            style.append(('TEXTCOLOR', (3, row), (3, row), colors.HexColor(color)))
        table.setStyle(TableStyle(style))
        elements.append(table)

        if report.get("findings"):
            elements.append(Paragraph("FINDINGS", self.styles['SectionHeading']))
            for finding in report["findings"]:
                elements.append(Paragraph("• " + self._escape_text(finding), self.styles['BodyJustify']))

        if report.get("notes"):
            elements.append(Paragraph("NOTES", self.styles['SectionHeading']))
            for para in report["notes"].split("\n\n"):
                elements.append(Paragraph(self._escape_text(para.replace("\n", " ")), self.styles['BodyJustify']))
        return elements

    def _build_appendix_transcripts(self, transcripts: List[Dict[str, Any]]) -> List:
        elements = []
        elements.append(Paragraph("APPENDIX: TRANSCRIPTS", self.styles['SectionHeading']))
        for item in transcripts:
            elements.append(Paragraph(self._escape_text(item["label"]), self.styles['Heading3']))
            transcript = item["transcript"]
            body = {key: transcript[key] for key in ("events", "outcome") if key in transcript}
            elements.append(Preformatted(
                json.dumps(body, sort_keys=True, indent=1),
                self.styles['Code']
            ))
        return elements
