"""Command-line entry point: exit codes, stage commands and the metrics shortcuts."""

import json
import os

import pytest

from src.main import build_parser, main


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_every_stage_has_a_command():
    parser = build_parser()
    for command in ("ingest", "analyze", "model", "gen-cases", "verify", "forge", "loop", "metrics", "run-all", "report"):
        assert parser.parse_args([command]).command == command


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["deploy"])
    assert info.value.code == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("conformance-forge 0.4.0")


def test_ingest_writes_the_tree(tmp_path, sample_dir, capsys):
    run_dir = tmp_path / "run"
    code = main(["ingest", "--config", os.path.join(sample_dir, "config.json"), "--run-dir", str(run_dir)])
    assert code == 0
    assert (run_dir / "ingest" / "tree.json").is_file()
    assert capsys.readouterr().out.startswith("ingest")


def test_stage_without_predecessor_exits_1(tmp_path, sample_dir, capsys):
    code = main(["verify", "--config", os.path.join(sample_dir, "config.json"), "--run-dir", str(tmp_path / "run")])
    assert code == 1
    assert "generate" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path, capsys):
    assert main(["analyze", "--config", str(tmp_path / "missing.json")]) == 1
    assert "config file not found" in capsys.readouterr().err


def test_metrics_pair(tmp_path, capsys):
    answer = write(tmp_path / "config.answer", "hostname DUT\ninterface Gi0/0\n ip address 10.0.0.1/24\n")
    output = write(tmp_path / "config.output", "hostname DUT\ninterface Gi0/0\n ip address 10.0.0.1 255.255.255.0\n")
    report_path = tmp_path / "pair.json"

    code = main(["metrics", "--answer", answer, "--output", output, "--kind", "config", "--json", str(report_path)])

    assert code == 0
    assert "100.0%" in capsys.readouterr().out
    assert json.loads(report_path.read_text(encoding="utf-8"))["recall"] == 1.0


def test_metrics_pair_needs_both_files(tmp_path, capsys):
    answer = write(tmp_path / "config.answer", "hostname DUT\n")
    assert main(["metrics", "--answer", answer]) == 1
    assert "go together" in capsys.readouterr().err


def test_fix_time(capsys):
    assert main(["metrics", "--fix-time", "10", "0.5", "0.8", "60"]) == 0
    assert capsys.readouterr().out.startswith("fix time")


def test_init_kb(tmp_path, capsys):
    target = tmp_path / "kb"
    assert main(["forge", "--init-kb", str(target)]) == 0
    assert (target / "experience_pool.json").is_file()
    # Refuses to overwrite
    assert main(["forge", "--init-kb", str(target)]) == 1


def test_report_of_missing_run(tmp_path, sample_dir, capsys):
    code = main(["report", "--config", os.path.join(sample_dir, "config.json"), "--run-dir", str(tmp_path / "none")])
    assert code == 1
    assert "No run manifest" in capsys.readouterr().err


def test_report_of_finished_run(completed_run, sample_dir, tmp_path, capsys):
    xlsx = tmp_path / "report.xlsx"
    code = main(
        ["report", "--config", os.path.join(sample_dir, "config.json"), "--run-dir", completed_run, "--xlsx", str(xlsx)]
    )
    assert code == 0
    assert "Feedback loops" in capsys.readouterr().out
    assert xlsx.is_file()
