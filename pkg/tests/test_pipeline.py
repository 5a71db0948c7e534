"""Stage driver: manifest, resume, predecessor checks and deterministic offline runs."""

import json
import os
import shutil
import time

import pytest

from src.errors import MissingPredecessorArtifact, StageFailed
from src.models.jsonio import read_json, read_jsonl
from src.models.manifest import MANIFEST_NAME, RunManifest, StageStatus
from src.models.settings import STAGES
from src.models.testcase import TestCase
from src.services import pipeline


def run_files(run_dir):
    found = {}
    for dirpath, _, filenames in os.walk(run_dir):
        for name in filenames:
            path = os.path.join(dirpath, name)
            rel = os.path.relpath(path, run_dir)
            if rel == MANIFEST_NAME:
                continue
            with open(path, "rb") as f:
                found[rel] = f.read()
    return found


def fail_if_called(ctx):
    raise AssertionError("stage should have been skipped")


@pytest.fixture
def run_copy(completed_run, tmp_path):
    target = str(tmp_path / "run")
    shutil.copytree(completed_run, target)
    return target


def test_every_stage_is_recorded(completed_run):
    manifest = RunManifest.load(completed_run)
    assert manifest.run_id == "mini-rfc"
    assert [r.stage for r in manifest.stages] == STAGES
    assert all(r.status == StageStatus.DONE for r in manifest.stages)
    assert all(r.checksums_match(completed_run) for r in manifest.stages)
    assert "ingest/tree.json" in manifest.get("ingest").artifacts


def test_stage_outputs(completed_run):
    suite = read_jsonl(os.path.join(completed_run, "verify", "suite.jsonl"))
    assert suite
    assert len({c["case_id"] for c in suite}) == len(suite)

    summary = read_json(os.path.join(completed_run, "forge", "summary.json"))
    assert summary["passed"] + summary["escalated"] == len(suite)

    outcomes = read_json(os.path.join(completed_run, "loop", "outcomes.json"))
    assert sorted(o["case_id"] for o in outcomes) == sorted(c["case_id"] for c in suite)
    assert {o["status"] for o in outcomes} <= {"pass", "resolved", "manual_review"}

    report = read_json(os.path.join(completed_run, "metrics", "metric_report.json"))
    assert report["cases"] == len(suite)
    assert 0.0 <= report["simulated_validation_rate"] <= 1.0
    assert set(report["answers"]) == {"script", "config"}
    assert os.path.isfile(os.path.join(completed_run, "verify", "external_breadth.json"))


def test_offline_runs_are_byte_identical(completed_run, tmp_path, sample_config):
    second = str(tmp_path / "second")
    pipeline.run(sample_config(), second)
    assert run_files(second) == run_files(completed_run)


def test_unchanged_run_skips_every_stage(run_copy, monkeypatch, sample_config):
    for stage in STAGES:
        monkeypatch.setitem(pipeline.STAGE_FUNCTIONS, stage, fail_if_called)
    manifest = pipeline.run(sample_config(), run_copy)
    assert all(r.status == StageStatus.DONE for r in manifest.stages)


def test_changed_threshold_reruns_from_verify(run_copy, monkeypatch, sample_config):
    for stage in STAGES[: STAGES.index("verify")]:
        monkeypatch.setitem(pipeline.STAGE_FUNCTIONS, stage, fail_if_called)
    config = sample_config()
    config.coverage.threshold = 70.0
    before = RunManifest.load(run_copy).get("verify").input_digest

    manifest = pipeline.run(config, run_copy)

    assert manifest.get("verify").input_digest != before
    assert all(r.status == StageStatus.DONE for r in manifest.stages)


def test_stage_without_predecessor_output(tmp_path, sample_config):
    config = sample_config()
    config.stages = ["verify"]
    with pytest.raises(MissingPredecessorArtifact) as info:
        pipeline.run(config, str(tmp_path / "empty"))
    assert (info.value.stage, info.value.predecessor) == ("verify", "generate")


def test_tampered_predecessor_is_stale(run_copy, sample_config):
    with open(os.path.join(run_copy, "ingest", "tree.json"), "a", encoding="utf-8") as f:
        f.write("\n")
    config = sample_config()
    config.stages = ["analyze"]
    with pytest.raises(MissingPredecessorArtifact):
        pipeline.run(config, run_copy)


def test_failing_stage_is_recorded(run_copy, monkeypatch, sample_config):
    def broken(ctx):
        raise ValueError("boom")

    monkeypatch.setitem(pipeline.STAGE_FUNCTIONS, "metrics", broken)
    config = sample_config()
    config.stages = ["metrics"]
    config.answers_dir = ""

    with pytest.raises(StageFailed) as info:
        pipeline.run(config, run_copy)

    assert info.value.stage == "metrics"
    record = RunManifest.load(run_copy).get("metrics")
    assert record.status == StageStatus.FAILED
    assert record.error == "boom"
    assert record.artifacts == {}


def test_rerun_invalidates_later_stages(run_copy, sample_config):
    config = sample_config()
    config.stages = ["forge"]
    config.loop.max_attempts = 1
    manifest = pipeline.run(config, run_copy)
    assert manifest.get("forge").status == StageStatus.DONE
    assert manifest.get("loop").status == StageStatus.PENDING
    assert manifest.get("metrics").status == StageStatus.PENDING


def test_external_suite_formats(tmp_path, sample_dir):
    cases = pipeline.load_external_suite(os.path.join(sample_dir, "external_suite.jsonl"))
    assert cases
    as_object = tmp_path / "suite.json"
    as_object.write_text(
        '{"test_cases": [' + ", ".join(json.dumps(c.to_dict()) for c in cases) + "]}", encoding="utf-8"
    )
    assert [c.case_id for c in pipeline.load_external_suite(str(as_object))] == [c.case_id for c in cases]


@pytest.fixture(scope="module")
def recorded_transcript(tmp_path_factory):
    """A transcript recorded from the offline responder with the sample record config."""
    from src.models.settings import RunConfig

    base = tmp_path_factory.mktemp("recorded")
    config = RunConfig.load(os.path.join(os.path.dirname(__file__), "..", "samples", "mini_rfc", "config.record.json"))
    config.backend.transcript_path = str(base / "transcript.jsonl")
    pipeline.run(config, str(base / "run"))
    return config.backend.transcript_path


def replay_config(sample_dir, transcript):
    from src.models.settings import RunConfig

    config = RunConfig.load(os.path.join(sample_dir, "config.replay.json"))
    config.backend.transcript_path = transcript
    return config


def test_replay_runs_are_byte_identical(recorded_transcript, sample_dir, tmp_path):
    first, second = str(tmp_path / "first"), str(tmp_path / "second")
    started = time.perf_counter()
    pipeline.run(replay_config(sample_dir, recorded_transcript), first)
    assert time.perf_counter() - started < 30.0
    pipeline.run(replay_config(sample_dir, recorded_transcript), second)

    assert run_files(first) == run_files(second)

    modules = read_json(os.path.join(first, "analyze", "modules.json"))["modules"]
    points = read_json(os.path.join(first, "model", "testing_points.json"))
    cases = [TestCase.from_dict(c) for c in read_jsonl(os.path.join(first, "generate", "testcases.jsonl"))]
    breadth = read_json(os.path.join(first, "verify", "breadth.json"))
    assert len(modules) >= 3
    assert len(points) >= 10
    assert len(cases) >= 10
    assert all(c.steps and c.expected_results for c in cases)
    assert breadth["key_sections"]
    assert breadth["coverage_rate"] == 1.0


def test_replay_without_transcript_fails(sample_dir, tmp_path):
    config = replay_config(sample_dir, str(tmp_path / "missing.jsonl"))
    config.stages = ["ingest", "analyze"]
    with pytest.raises(StageFailed) as info:
        pipeline.run(config, str(tmp_path / "run"))
    assert info.value.stage == "analyze"
