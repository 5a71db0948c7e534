"""Run summary tables and the Excel export."""

import pytest
from openpyxl import load_workbook

from src.errors import ManifestMissing
from src.services.report_service import ReportTable, build_report, render_text, write_xlsx


def test_empty_directory_has_no_report(tmp_path):
    with pytest.raises(ManifestMissing):
        build_report(str(tmp_path))


def test_tables_of_a_finished_run(completed_run):
    tables = {t.title: t for t in build_report(completed_run)}
    assert list(tables) == ["Test case generation", "Coverage", "Feedback loops", "Artifact metrics", "Stage timings"]

    generation = tables["Test case generation"]
    assert generation.rows[-1][0] == "all"
    assert generation.rows[-1][3] == sum(row[3] for row in generation.rows[:-1])

    coverage_labels = [row[0] for row in tables["Coverage"].rows]
    assert coverage_labels == ["generated (before refinement)", "generated (after refinement)", "external"]

    metrics = tables["Artifact metrics"]
    assert [row[0] for row in metrics.rows] == ["simulated testbed", "config", "script"]

    timings = tables["Stage timings"]
    assert timings.rows[0][:2] == ["ingest", "done"]
    assert timings.rows[-1][0] == "forge (per case)"


def test_render_text_aligns_columns():
    table = ReportTable("Demo", ["Name", "Value"], [["a", 1], ["longer", 22]])
    text = render_text([table, ReportTable("Empty", ["X"])])
    assert text.splitlines()[:5] == [
        "Demo",
        "====",
        "Name    Value",
        "------  -----",
        "a       1",
    ]
    assert "(no data)" in text


def test_write_xlsx(tmp_path):
    tables = [
        ReportTable("Coverage: before/after", ["Suite", "Breadth"], [["generated", "50.0%"]]),
        ReportTable("Stage timings", ["Stage", "Seconds"], [["ingest", "0.01"]]),
    ]
    path = write_xlsx(tables, str(tmp_path / "out" / "report.xlsx"))

    wb = load_workbook(path)
    assert wb.sheetnames == ["Coverage beforeafter", "Stage timings"]
    ws = wb["Coverage beforeafter"]
    assert [c.value for c in ws[1]] == ["Suite", "Breadth"]
    assert ws["A1"].font.bold
    assert ws["A2"].value == "generated"
