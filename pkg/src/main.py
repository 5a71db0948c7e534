"""Command-line entry point for Conformance Forge."""

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import version_string
from .errors import ForgeError, PreconditionViolation
from .logging_config import get_logger, log_startup_info, set_console_level

logger = get_logger("main")

# Subcommand -> pipeline stage
STAGE_COMMANDS = {
    "ingest": "ingest",
    "analyze": "analyze",
    "model": "model",
    "gen-cases": "generate",
    "verify": "verify",
    "forge": "forge",
    "loop": "loop",
    "metrics": "metrics",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run config JSON (default: user config, else built-in defaults)")
    parser.add_argument("--run-dir", help="run directory (default: output_dir from the config)")
    parser.add_argument(
        "--backend-mode", choices=["live", "replay", "record", "offline"], help="override every backend's mode"
    )
    parser.add_argument("--spec", help="specification text file (overrides spec_path)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug output on the console")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conformance-forge",
        description="Generate conformance test cases and executable tests from a protocol specification.",
    )
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("ingest", "analyze", "model", "gen-cases", "loop", "run-all"):
        _add_common(sub.add_parser(name, help=f"run the {name} stage" if name != "run-all" else "run every stage"))

    verify = sub.add_parser("verify", help="score coverage and refine the suite")
    _add_common(verify)
    verify.add_argument("--external-suite", help="also score this suite (JSON lines or JSON)")

    forge = sub.add_parser("forge", help="generate executable artifacts")
    _add_common(forge)
    forge.add_argument("--init-kb", metavar="DIR", help="write a default knowledge base to DIR and exit")

    metrics = sub.add_parser("metrics", help="score artifacts")
    _add_common(metrics)
    metrics.add_argument("--answer", help="reference answer file")
    metrics.add_argument("--output", help="generated file to compare with --answer")
    metrics.add_argument("--kind", choices=["script", "config"], default="config")
    metrics.add_argument("--json", metavar="PATH", help="also write the single-pair report as JSON")
    metrics.add_argument("--answers-dir", help="reference answers named script.<id> / config.<id>")
    metrics.add_argument(
        "--fix-time", nargs=4, type=float, metavar=("GEN", "VR", "SIM", "MANUAL"),
        help="estimate fix time and speedup (minutes, rates in [0, 1])",
    )

    report = sub.add_parser("report", help="summarize a run")
    _add_common(report)
    report.add_argument("--xlsx", metavar="PATH", help="also write the tables to an Excel workbook")
    return parser


def _load_config(args: argparse.Namespace):
    from .models.settings import RunConfig

    config = RunConfig.load(args.config)
    if args.run_dir:
        config.output_dir = os.path.abspath(args.run_dir)
    if args.spec:
        config.spec_path = os.path.abspath(args.spec)
    if args.backend_mode:
        config.backend.mode = args.backend_mode
        for descriptor in config.stage_backends.values():
            descriptor.mode = args.backend_mode
    if getattr(args, "external_suite", None):
        config.external_suite = os.path.abspath(args.external_suite)
    if getattr(args, "answers_dir", None):
        config.answers_dir = os.path.abspath(args.answers_dir)
    return config


def _run_stages(args: argparse.Namespace, stages: List[str]) -> int:
    from .services import pipeline

    config = _load_config(args)
    config.stages = stages
    manifest = pipeline.run(config)
    for record in manifest.stages:
        print(f"{record.stage:10s} {record.status.value:8s} {record.seconds:8.2f}s")
    return 0


def _metrics_command(args: argparse.Namespace) -> int:
    from .models.jsonio import write_json
    from .services.metrics import compare_files, fix_time_table
    from .services.report_service import ReportTable, render_text

    handled = False
    if args.answer or args.output:
        if not (args.answer and args.output):
            raise PreconditionViolation("metrics: --answer and --output go together")
        report = compare_files(args.answer, args.output, args.kind)
        table = ReportTable(f"{args.kind} metrics", ["File", "Recall", "Similarity", "Edit distance"])
        table.rows.append(
            [report.label, f"{report.recall * 100:.1f}%", f"{report.similarity * 100:.1f}%", report.edit_distance]
        )
        print(render_text([table]), end="")
        if args.json:
            write_json(args.json, report.to_dict())
        handled = True
    if args.fix_time:
        gen, vr, sim, manual = args.fix_time
        fix, factor = fix_time_table(gen, vr, sim, manual)
        print(f"fix time {fix:.2f} min, speedup {factor:.2f}x")
        handled = True
    if handled:
        return 0
    return _run_stages(args, ["metrics"])


def _report_command(args: argparse.Namespace) -> int:
    from .services.report_service import build_report, render_text, write_xlsx

    config = _load_config(args)
    run_dir = config.resolve(config.output_dir)
    tables = build_report(run_dir)
    print(render_text(tables), end="")
    if args.xlsx:
        write_xlsx(tables, args.xlsx)
    return 0


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "forge" and args.init_kb:
        from .services.knowledge_base import KnowledgeBase

        print(KnowledgeBase.init_default(args.init_kb))
        return 0
    if args.command == "metrics":
        return _metrics_command(args)
    if args.command == "report":
        return _report_command(args)
    if args.command == "run-all":
        return _run_stages(args, [])
    return _run_stages(args, [STAGE_COMMANDS[args.command]])


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_console_level(logging.DEBUG)
    log_startup_info(args.command)

    try:
        return dispatch(args)
    except ForgeError as e:
        logger.debug(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        print(f"unexpected error: {e} (details in the log file)", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
