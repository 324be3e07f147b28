"""
One-page PDF summary of a key-rate analysis.
Requires: pip install reportlab
"""
from io import BytesIO
from pathlib import Path
from xml.sax.saxutils import escape

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER, TA_LEFT, TA_RIGHT
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from config.constants import PUBLISHED_RESULTS

HEADER_COLOR = colors.HexColor('#2d2d2d')
SECTION_COLORS = {
    'ok': colors.HexColor('#2d8659'),
    'zero': colors.HexColor('#c44545'),
}


def wrap_text(text, style):
    """Wrap text in a Paragraph for automatic text wrapping (markup characters escaped)."""
    return Paragraph(escape(str(text)), style)


def fmt(value, spec='.4g'):
    if value is None:
        return 'n/a'
    if isinstance(value, str):
        return value
    return format(value, spec)


def create_table_style(highlight_last=None):
    style = [
        ('BACKGROUND', (0, 0), (-1, 0), HEADER_COLOR),
        ('TEXTCOLOR', (0, 0), (-1, 0), colors.white),
        ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
        ('GRID', (0, 0), (-1, -1), 0.5, colors.grey),
        ('TOPPADDING', (0, 0), (-1, -1), 4),
        ('BOTTOMPADDING', (0, 0), (-1, -1), 4),
        ('LEFTPADDING', (0, 0), (-1, -1), 5),
        ('RIGHTPADDING', (0, 0), (-1, -1), 5),
        ('VALIGN', (0, 0), (-1, -1), 'TOP'),
    ]
    if highlight_last is not None:
        style.append(('BACKGROUND', (-1, -1), (-1, -1), SECTION_COLORS[highlight_last]))
        style.append(('TEXTCOLOR', (-1, -1), (-1, -1), colors.white))
    return TableStyle(style)


def generate_summary_pdf(document: dict, compare_published: bool = True) -> BytesIO:
    """Render the report document (see reports.writers.report_document) to PDF.

    Args:
        document: Report dictionary with decoy / aopp_chain / key_rate sections.
        compare_published: Add the published field-test values as a column.

    Returns:
        BytesIO: the PDF, positioned at 0.
    """
    buffer = BytesIO()
    doc = SimpleDocTemplate(buffer, pagesize=A4, topMargin=0.5 * inch, bottomMargin=0.5 * inch,
                            leftMargin=0.6 * inch, rightMargin=0.6 * inch)
    styles = getSampleStyleSheet()
    cell = ParagraphStyle('Cell', parent=styles['Normal'], fontSize=8, leading=10, alignment=TA_LEFT)
    cell_right = ParagraphStyle('CellRight', parent=cell, alignment=TA_RIGHT)
    header = ParagraphStyle('CellHeader', parent=cell, fontName='Helvetica-Bold', textColor=colors.white)
    title_style = ParagraphStyle('Title', parent=styles['Heading1'], fontSize=15, alignment=TA_CENTER, spaceAfter=8)

    decoy = document.get('decoy') or {}
    chain = document.get('aopp_chain') or {}
    key = document.get('key_rate') or {}
    sifted = document.get('sifted') or {}
    meta = document.get('metadata') or {}

    rows = [
        ('Sifted Z bits n_t', sifted.get('n_t'), 'n_t'),
        ('Z bit error rate E', sifted.get('E'), 'E'),
        ('Untagged bits n1 (before AOPP)', decoy.get('n1_low'), 'n1'),
        ('Phase-flip error e1ph (before AOPP)', decoy.get('e1ph_up'), 'e1ph'),
        ('Bits after AOPP nt\'', chain.get('nt_prime'), 'nt_prime'),
        ('Error rate after AOPP E\'', chain.get('E_prime'), 'E_prime'),
        ('Untagged bits after AOPP n1\'', chain.get('n1_prime'), 'n1_prime'),
        ('Phase-flip error after AOPP e1ph\'', chain.get('e1ph_prime'), 'e1ph_prime'),
        ('Key rate R (per pulse)', key.get('rate_per_pulse'), 'rate'),
        ('Key rate (bps)', key.get('rate_bps'), 'rate_bps'),
        ('Absolute PLOB bound', key.get('plob_absolute'), 'plob_absolute'),
        ('Relative PLOB bound', key.get('plob_relative'), 'plob_relative'),
    ]
    head = ['Quantity', 'Value'] + (['Published'] if compare_published else [])
    data = [[wrap_text(h, header) for h in head]]
    for label, value, ref in rows:
        line = [wrap_text(label, cell), wrap_text(fmt(value), cell_right)]
        if compare_published:
            line.append(wrap_text(fmt(PUBLISHED_RESULTS.get(ref)), cell_right))
        data.append(line)
    status = 'ok' if (key.get('key_length') or 0) > 0 else 'zero'
    data.append([wrap_text('Key length (bits)', cell), wrap_text(fmt(key.get('key_length'), '.6g'), cell_right)]
                + ([wrap_text(fmt(key.get('reason') or ''), cell)] if compare_published else []))

    elements = [Paragraph("SNS-TF-QKD KEY RATE SUMMARY", title_style), Spacer(1, 0.1 * inch)]
    table = Table(data, colWidths=[3.2 * inch, 1.6 * inch] + ([1.6 * inch] if compare_published else []),
                  repeatRows=1)
    table.setStyle(create_table_style(highlight_last=status))
    elements.append(table)
    elements.append(Spacer(1, 0.25 * inch))

    elements.append(Paragraph("Analysis settings", styles['Heading2']))
    budget = meta.get('eps_budget') or {}
    settings = [[wrap_text('Setting', header), wrap_text('Value', header)]]
    settings.append([wrap_text('Chernoff bound', cell), wrap_text(meta.get('chernoff_description', ''), cell)])
    settings.append([wrap_text('n01 scaled by', cell), wrap_text(meta.get('n01_scaled_by', ''), cell)])
    for name, value in budget.items():
        settings.append([wrap_text(name, cell), wrap_text(fmt(value), cell_right)])
    for name, digest in (meta.get('input_hashes') or {}).items():
        settings.append([wrap_text(f"sha256({name})", cell), wrap_text(digest, cell)])
    for clamp in decoy.get('clamps') or []:
        settings.append([wrap_text('clamp', cell), wrap_text(clamp, cell)])
    table = Table(settings, colWidths=[1.8 * inch, 4.6 * inch], repeatRows=1)
    table.setStyle(create_table_style())
    elements.append(table)

    doc.build(elements)
    buffer.seek(0)
    return buffer


def write_summary_pdf(document: dict, path, compare_published: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(generate_summary_pdf(document, compare_published).getvalue())
    return path
