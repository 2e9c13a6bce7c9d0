"""
Run report rendering
Uses ReportLab for the PDF form; JSON is the machine-readable form
"""
import io
import json
import os
from datetime import datetime, timezone

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Table, TableStyle

from models.report import PHASES, RunReport
from utils.errors import ParameterError

FORMATS = ('json', 'pdf')

# Longest outlier list printed per step row
MAX_IDS_PER_ROW = 12


def report_dict(report):
    return report.to_dict() if isinstance(report, RunReport) else dict(report)


def render_json(report):
    return json.dumps(report_dict(report), indent=2)


class ReportService:
    """PDF rendering of a RunReport"""

    def __init__(self):
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        self.styles.add(ParagraphStyle(
            name='RunTitle',
            parent=self.styles['Title'],
            fontSize=16,
            textColor=colors.HexColor('#0f172a'),
            spaceAfter=6,
        ))
        self.styles.add(ParagraphStyle(
            name='RunMeta',
            parent=self.styles['Normal'],
            fontSize=8,
            textColor=colors.HexColor('#64748b'),
            alignment=TA_CENTER,
            spaceAfter=14,
        ))
        self.styles.add(ParagraphStyle(
            name='RunSection',
            parent=self.styles['Heading4'],
            textColor=colors.HexColor('#0f766e'),
            spaceBefore=12,
            spaceAfter=4,
        ))
        self.styles.add(ParagraphStyle(name='Cell', parent=self.styles['Normal'], fontSize=8, leading=10))

    def _table(self, rows, widths, numeric=(), header=True):
        """Ruled table; columns listed in numeric are right-aligned"""
        table = Table(rows, colWidths=widths, repeatRows=1 if header else 0)
        first_row = 1 if header else 0
        style = [
            ('FONTNAME', (0, 0), (-1, -1), 'Courier'),
            ('FONTSIZE', (0, 0), (-1, -1), 8),
            ('LINEBELOW', (0, 0), (-1, -1), 0.25, colors.HexColor('#cbd5e1')),
            ('VALIGN', (0, 0), (-1, -1), 'TOP'),
        ]
        for column in numeric:
            style.append(('ALIGN', (column, first_row), (column, -1), 'RIGHT'))
        if header:
            style += [
                ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
                ('TEXTCOLOR', (0, 0), (-1, 0), colors.white),
                ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#0f766e')),
            ]
        else:
            style.append(('FONTNAME', (0, 0), (0, -1), 'Helvetica-Bold'))
        table.setStyle(TableStyle(style))
        return table

    def _add_title(self, elements, data):
        elements.append(Paragraph("Outlier Detection Run", self.styles['RunTitle']))
        stamp = datetime.now(timezone.utc).strftime('%Y-%m-%d %H:%M UTC')
        elements.append(Paragraph(f"{data.get('transport', 'inproc')} transport, seed {data.get('seed')}, "
                                  f"rendered {stamp}", self.styles['RunMeta']))

    def _add_summary(self, elements, data):
        config = data['config']
        elements.append(Paragraph("Session", self.styles['RunSection']))
        rows = [
            ['Points', str(data.get('points', 0))],
            ['Dimensions', str(len(config.get('bounds', [])))],
            ['W / S / k', f"{config.get('window')} / {config.get('slide')} / {config.get('k')}"],
            ['R / epsilon', f"{config.get('radius')} / {config.get('epsilon')}"],
            ['l / l_D', f"{config.get('bits')} / {config.get('rounding_bits')}"],
            ['Triples consumed', str(data.get('triples_consumed', 0))],
            ['Oracle verdict', data.get('verdict', 'skipped')],
        ]
        elements.append(self._table(rows, [1.8 * inch, 3 * inch], header=False))

    def _add_phases(self, elements, data):
        elements.append(Paragraph("Phases", self.styles['RunSection']))
        peer = (data.get('party_metrics') or {}).get('p0', {}).get('peer', {}).get('phases', {})
        rows = [['Phase', 'Seconds', 'Bytes sent (P0)', 'Messages (P0)']]
        for phase in PHASES:
            seconds = data.get('phase_seconds', {}).get(phase, 0.0)
            metrics = peer.get(phase, {})
            rows.append([phase, f"{seconds:.3f}", str(metrics.get('bytes_sent', 0)),
                         str(metrics.get('rounds', 0))])
        elements.append(self._table(rows, [1.3 * inch, 1 * inch, 1.5 * inch, 1.2 * inch], numeric=(1, 2, 3)))

    def _add_steps(self, elements, data):
        elements.append(Paragraph("Outliers per step", self.styles['RunSection']))
        rows = [['Step', 'Phase', 'Outliers', 'Distances', 'Re-sorted']]
        for step in data.get('steps', []):
            ids = step['outliers']
            shown = ', '.join(str(i) for i in ids[:MAX_IDS_PER_ROW])
            if len(ids) > MAX_IDS_PER_ROW:
                shown += f" (+{len(ids) - MAX_IDS_PER_ROW})"
            rows.append([str(step['step']), step['phase'], Paragraph(shown or '-', self.styles['Cell']),
                         str(step['distance_evaluations']), str(step['resorted_entries'])])
        elements.append(self._table(rows, [0.5 * inch, 0.9 * inch, 3.1 * inch, 0.9 * inch, 0.9 * inch],
                                    numeric=(0, 3, 4)))

    def _add_leakage(self, elements, data):
        leakage = data.get('leakage') or {}
        if not leakage:
            return
        elements.append(Paragraph("Decodes to cleartext", self.styles['RunSection']))
        rows = [['Server', 'Category', 'Count']]
        for party in ('p0', 'p1'):
            for category, count in sorted((leakage.get(party) or {}).items()):
                rows.append([party, category, str(count)])
        elements.append(self._table(rows, [0.8 * inch, 2.2 * inch, 0.8 * inch], numeric=(2,)))
        violations = leakage.get('violations') or []
        if violations:
            elements.append(Paragraph(f"<b>{len(violations)} decodes outside the allowed categories</b>",
                                      self.styles['Cell']))

    def generate_run_report(self, report):
        """
        Render a run report

        Returns:
            PDF file as BytesIO object
        """
        data = report_dict(report)
        buffer = io.BytesIO()
        doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=0.75 * inch, bottomMargin=0.75 * inch)
        elements = []
        self._add_title(elements, data)
        self._add_summary(elements, data)
        self._add_phases(elements, data)
        self._add_steps(elements, data)
        self._add_leakage(elements, data)
        if data.get('mismatches'):
            elements.append(Paragraph("Oracle mismatches", self.styles['RunSection']))
            for mismatch in data['mismatches']:
                elements.append(Paragraph(json.dumps(mismatch), self.styles['Cell']))
        doc.build(elements)
        buffer.seek(0)
        return buffer


def write_report(report, path=None, fmt='json'):
    """
    Write a report to path, or return JSON text when path is None

    Returns:
        the path written, or the JSON text
    """
    if fmt not in FORMATS:
        raise ParameterError(f'Report format must be one of {FORMATS}')
    if fmt == 'pdf':
        if not path:
            raise ParameterError('PDF reports need an output path')
        folder = os.path.dirname(path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        with open(path, 'wb') as handle:
            handle.write(ReportService().generate_run_report(report).getvalue())
        return path
    text = render_json(report)
    if path is None:
        return text
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(text)
    return path
