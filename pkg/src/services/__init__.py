"""Services package."""

from .spec_ingest import ingest_file, clean_document, extract_metadata, build_section_tree
from .llm_gateway import CompletionGateway, build_backend
from .high_level_analysis import summarize_sections, summarize_protocol, form_modules, complete_modules
from .low_level_modeling import model_all, enumerate_points
from .testcase_engine import generate_cases, select_key_sections, compute_breadth, judge_all, refine
from .knowledge_base import KnowledgeBase
from .artifact_forge import ForgeContext, generate
from .feedback_loops import run_small_loop, escalate, run_case
from .metrics import compare, compare_files, score_answers_dir, estimate_fix_time, speedup
from .report_service import build_report, render_text, write_xlsx

__all__ = [
    "ingest_file",
    "clean_document",
    "extract_metadata",
    "build_section_tree",
    "CompletionGateway",
    "build_backend",
    "summarize_sections",
    "summarize_protocol",
    "form_modules",
    "complete_modules",
    "model_all",
    "enumerate_points",
    "generate_cases",
    "select_key_sections",
    "compute_breadth",
    "judge_all",
    "refine",
    "KnowledgeBase",
    "ForgeContext",
    "generate",
    "run_small_loop",
    "escalate",
    "run_case",
    "compare",
    "compare_files",
    "score_answers_dir",
    "estimate_fix_time",
    "speedup",
    "build_report",
    "render_text",
    "write_xlsx",
]
