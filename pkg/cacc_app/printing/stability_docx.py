from __future__ import annotations

import logging
from pathlib import Path

from docx import Document

from ..bundle import grouped_conditions
from ..stability import StabilityReport

LOG = logging.getLogger(__name__)

DOCX_NAME = "stability_report.docx"


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def build_stability_document(report: StabilityReport, *, title: str = "Отчёт об устойчивости колонны"):
    """
    Редактируемый Word-отчёт: параметры, таблица условий, h_min и H-inf нормы.
    """
    p = report.params
    doc = Document()
    doc.add_heading(title, level=1)

    verdict = "certified" if report.certified else "NOT certified: " + ", ".join(report.failed)
    doc.add_paragraph(f"Verdict: {verdict}")

    doc.add_heading("Parameters", level=2)
    params = doc.add_table(rows=1, cols=2)
    params.style = "Table Grid"
    params.rows[0].cells[0].text = "parameter"
    params.rows[0].cells[1].text = "value"
    for name, value in (
        ("tau", p.tau), ("h", p.h), ("Delta", p.delta), ("r", p.r),
        ("k_p", p.gains.kp), ("k_v", p.gains.kv), ("k_a", p.gains.ka),
    ):
        cells = params.add_row().cells
        cells[0].text = name
        cells[1].text = _fmt(value)

    doc.add_heading("Conditions", level=2)
    table = doc.add_table(rows=1, cols=6)
    table.style = "Table Grid"
    for cell, text in zip(table.rows[0].cells, ("group", "name", "expression", "lhs", "rhs", "verdict")):
        cell.text = text
    for group, c in grouped_conditions(report):
        cells = table.add_row().cells
        cells[0].text = group
        cells[1].text = c.name
        cells[2].text = c.expression
        cells[3].text = _fmt(c.lhs)
        cells[4].text = f"{c.relation} {_fmt(c.rhs)}"
        cells[5].text = "pass" if c.passed else "FAIL"

    doc.add_heading("Headway and norms", level=2)
    doc.add_paragraph(f"h_min = {_fmt(report.h_min)} s (h = {_fmt(p.h)} s)")
    for l, (norm, w) in enumerate(zip(report.hinf_norms, report.peak_omegas), start=1):
        doc.add_paragraph(f"sup |H_{l}| = {_fmt(norm)} at omega = {_fmt(w)} rad/s (bound {_fmt(1.0 / p.r)})")
    return doc


def save_stability_docx(report: StabilityReport, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / DOCX_NAME
    build_stability_document(report).save(str(path))
    LOG.info("stability report saved to %s", path)
    return path
