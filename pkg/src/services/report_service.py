"""Summary tables of a finished run, as plain text or an Excel workbook."""

import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from openpyxl import Workbook
from openpyxl.styles import Font
from openpyxl.utils import get_column_letter

from ..errors import ManifestMissing
from ..logging_config import get_logger
from ..models.jsonio import read_json, read_jsonl
from ..models.manifest import RunManifest

logger = get_logger("report_service")

# Excel limits sheet titles to 31 characters without []:*?/\
_SHEET_UNSAFE = re.compile(r"[\[\]:*?/\\]")


@dataclass
class ReportTable:
    title: str
    headers: List[str]
    rows: List[List[Any]] = field(default_factory=list)


def _read(run_dir: str, *parts: str) -> Optional[Any]:
    path = os.path.join(run_dir, *parts)
    if not os.path.isfile(path):
        return None
    if path.endswith(".jsonl"):
        return read_jsonl(path)
    return read_json(path)


def _pct(value: Optional[float]) -> str:
    return "-" if value is None else f"{value * 100:.1f}%"


def _num(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def generation_table(run_dir: str) -> ReportTable:
    table = ReportTable("Test case generation", ["Origin", "Initial", "Supplemented", "Total"])
    suite = _read(run_dir, "verify", "suite.jsonl") or _read(run_dir, "generate", "testcases.jsonl") or []
    per_origin: Dict[str, List[int]] = {}
    for case in suite:
        counts = per_origin.setdefault(case.get("origin") or "unknown", [0, 0])
        counts[0 if case.get("kind", "initial") == "initial" else 1] += 1
    for origin in sorted(per_origin):
        initial, supplemented = per_origin[origin]
        table.rows.append([origin, initial, supplemented, initial + supplemented])
    table.rows.append(
        ["all", sum(c[0] for c in per_origin.values()), sum(c[1] for c in per_origin.values()), len(suite)]
    )
    return table


def coverage_table(run_dir: str) -> ReportTable:
    table = ReportTable("Coverage", ["Suite", "Breadth", "Basic function", "Boundary case"])
    for label, breadth_name, depth_name in (
        ("generated (before refinement)", "breadth_initial.json", "depth_initial.json"),
        ("generated (after refinement)", "breadth.json", "depth.json"),
        ("external", "external_breadth.json", "external_depth.json"),
    ):
        breadth = _read(run_dir, "verify", breadth_name)
        depth = _read(run_dir, "verify", depth_name)
        if breadth is None or depth is None:
            continue
        table.rows.append(
            [
                label,
                _pct(breadth.get("coverage_rate")),
                _num(depth.get("mean_basic_function_score")),
                _num(depth.get("mean_boundary_case_score")),
            ]
        )
    return table


def loop_table(run_dir: str) -> ReportTable:
    table = ReportTable("Feedback loops", ["Case", "Status", "Rounds", "Executions", "Suspected origin", "Note"])
    summary = _read(run_dir, "forge", "summary.json") or {"cases": []}
    outcomes = {o["case_id"]: o for o in _read(run_dir, "loop", "outcomes.json") or []}
    escalations = {e["case_id"]: e for e in _read(run_dir, "loop", "escalations.json") or []}
    for entry in summary["cases"]:
        case_id = entry["case_id"]
        status = outcomes.get(case_id, {}).get("status", entry["status"])
        escalation = escalations.get(case_id, {})
        origin = escalation.get("ticket", {}).get("suspected_origin", "")
        note = ""
        if "regenerated_case" in escalation:
            note = f"passed as {escalation['regenerated_case']}"
        elif "attempted_cases" in escalation:
            note = f"tried {', '.join(escalation['attempted_cases'])}"
        table.rows.append([case_id, status, entry.get("rounds", 0), entry.get("executions", 0), origin, note])
    return table


def metrics_table(run_dir: str) -> ReportTable:
    table = ReportTable("Artifact metrics", ["Kind", "VR", "Recall", "Similarity", "Cases"])
    report = _read(run_dir, "metrics", "metric_report.json")
    if report is None:
        return table
    table.rows.append(["simulated testbed", _pct(report.get("simulated_validation_rate")), "-", "-", report["cases"]])
    for kind, scored in sorted(report.get("answers", {}).items()):
        table.rows.append(
            [
                kind,
                _pct(scored.get("validation_rate")),
                _pct(scored.get("recall")),
                _pct(scored.get("similarity")),
                scored.get("counts", {}).get("n_total", 0),
            ]
        )
    return table


def timing_table(manifest: RunManifest, run_dir: str) -> ReportTable:
    table = ReportTable("Stage timings", ["Stage", "Status", "Seconds", "Files"])
    for record in manifest.stages:
        table.rows.append([record.stage, record.status.value, f"{record.seconds:.2f}", len(record.artifacts)])
    forge = manifest.get("forge")
    summary = _read(run_dir, "forge", "summary.json")
    if forge is not None and summary and summary["cases"]:
        per_case = forge.seconds / len(summary["cases"])
        table.rows.append(["forge (per case)", "", f"{per_case:.2f}", ""])
    return table


def build_report(run_dir: str) -> List[ReportTable]:
    """All tables for a run directory; raises ManifestMissing when it holds no run."""
    manifest = RunManifest.load(run_dir)
    if manifest is None:
        raise ManifestMissing(run_dir)
    tables = [
        generation_table(run_dir),
        coverage_table(run_dir),
        loop_table(run_dir),
        metrics_table(run_dir),
        timing_table(manifest, run_dir),
    ]
    logger.debug(f"Built {len(tables)} report tables for run {manifest.run_id}")
    return tables


def render_text(tables: List[ReportTable]) -> str:
    blocks = []
    for table in tables:
        cells = [table.headers] + [[str(c) for c in row] for row in table.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(table.headers))]
        lines = [table.title, "=" * len(table.title)]
        for n, row in enumerate(cells):
            lines.append("  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        if not table.rows:
            lines.append("(no data)")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _sheet_title(title: str) -> str:
    return _SHEET_UNSAFE.sub("", title)[:31]


def write_xlsx(tables: List[ReportTable], path: str) -> str:
    """One sheet per table, bold header row; replaces ``path`` atomically."""
    wb = Workbook()
    wb.remove(wb.active)
    for table in tables:
        ws = wb.create_sheet(_sheet_title(table.title))
        ws.append(table.headers)
        for cell in ws[1]:
            cell.font = Font(bold=True)
        for row in table.rows:
            ws.append(row)
        for col, header in enumerate(table.headers, start=1):
            longest = max([len(str(header))] + [len(str(r[col - 1])) for r in table.rows])
            ws.column_dimensions[get_column_letter(col)].width = min(60, longest + 2)

    dir_path = os.path.dirname(os.path.abspath(path))
    os.makedirs(dir_path, exist_ok=True)
    temp_fd, temp_path = tempfile.mkstemp(suffix=".xlsx", dir=dir_path)
    os.close(temp_fd)
    try:
        wb.save(temp_path)
        wb.close()
        shutil.move(temp_path, path)
    except Exception:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
    logger.info(f"Report written to {path}")
    return path
