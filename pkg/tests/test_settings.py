"""Run config loading, validation and backend descriptors."""

import json
import os

import pytest

from src.errors import ConfigError
from src.models.settings import (
    ENV_ENDPOINT,
    BackendDescriptor,
    CoverageConfig,
    ForgeOptions,
    LoopConfig,
    RunConfig,
)


def test_sample_config_loads_relative_to_its_directory(sample_dir):
    config = RunConfig.load(os.path.join(sample_dir, "config.json"))
    assert config.resolve(config.spec_path) == os.path.join(sample_dir, "mini_rfc.txt")
    assert config.coverage.threshold == 50.0
    assert config.loop.execution_bound == 30
    assert config.backend.mode == "offline"
    config.validate()


def test_missing_explicit_config_is_an_error(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(str(tmp_path / "nope.json"))


def test_bad_json_is_a_config_error(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.load(str(path))


def test_unknown_keys_are_ignored(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"run_id": "x", "colour": "blue", "loop": {"max_attempts": 2, "speed": 9}}))
    config = RunConfig.load(str(path))
    assert config.run_id == "x"
    assert config.loop.max_attempts == 2


def test_save_and_load_keep_values(tmp_path):
    config = RunConfig(run_id="r1", stages=["verify", "forge"], coverage=CoverageConfig(threshold=60.0))
    path = str(tmp_path / "sub" / "config.json")
    config.save(path)
    loaded = RunConfig.load(path)
    assert loaded.run_id == "r1"
    assert loaded.stages == ["verify", "forge"]
    assert loaded.coverage.threshold == 60.0
    assert loaded.config_dir == os.path.dirname(os.path.abspath(path))


@pytest.mark.parametrize(
    "build",
    [
        lambda: LoopConfig(max_rounds_per_attempt=0),
        lambda: LoopConfig(regeneration_passes=0),
        lambda: CoverageConfig(weight_map={"functional": 1.5}),
        lambda: CoverageConfig(threshold=-1),
        lambda: ForgeOptions(similarity_cutoff=1.2),
    ],
)
def test_out_of_range_values_are_rejected(build):
    with pytest.raises(ConfigError):
        build()


def test_stage_selection_must_be_known_and_contiguous():
    with pytest.raises(ConfigError, match="unknown stage"):
        RunConfig(stages=["verify", "deploy"]).validate()
    with pytest.raises(ConfigError, match="contiguous"):
        RunConfig(stages=["model", "forge"]).validate()


def test_ingest_needs_a_spec_file(tmp_path):
    with pytest.raises(ConfigError, match="spec file"):
        RunConfig(stages=["ingest"], config_dir=str(tmp_path)).validate()


def test_missing_profile_is_reported(tmp_path):
    config = RunConfig(stages=["forge"], testbed_profile="faults/none.json", config_dir=str(tmp_path))
    with pytest.raises(ConfigError, match="testbed_profile"):
        config.validate()


def test_backend_validation(monkeypatch):
    monkeypatch.delenv(ENV_ENDPOINT, raising=False)
    BackendDescriptor().validate()
    with pytest.raises(ConfigError):
        BackendDescriptor(mode="psychic").validate()
    with pytest.raises(ConfigError, match="transcript_path"):
        BackendDescriptor(mode="replay").validate()
    with pytest.raises(ConfigError, match="endpoint"):
        BackendDescriptor(mode="live").validate()
    BackendDescriptor(mode="record", upstream="offline", transcript_path="t.jsonl").validate()


def test_endpoint_comes_from_the_environment(monkeypatch):
    monkeypatch.setenv(ENV_ENDPOINT, "http://localhost:8000/v1/chat/completions")
    descriptor = BackendDescriptor(mode="live").with_env()
    assert descriptor.endpoint == "http://localhost:8000/v1/chat/completions"
    descriptor.validate()


def test_stage_backend_override():
    replay = BackendDescriptor(mode="replay", transcript_path="t.jsonl")
    config = RunConfig(stage_backends={"forge": replay})
    assert config.backend_for("forge") is replay
    assert config.backend_for("analyze").mode == "offline"
