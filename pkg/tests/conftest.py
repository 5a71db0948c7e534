"""Shared fixtures: the bundled mini-RFC, offline gateways and scratch run directories."""

import os
import tempfile

# Keep the rotating log file out of the source tree while testing
os.environ.setdefault("CONFORMANCE_FORGE_LOG_DIR", tempfile.gettempdir())

import pytest
from hypothesis import HealthCheck, settings

from src.services.llm_gateway import CallableBackend, CompletionGateway, OfflineBackend
from src.services.spec_ingest import ingest_file

settings.register_profile(
    "ci",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.register_profile("dev", max_examples=25, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SAMPLE_DIR = os.path.join(ROOT, "samples", "mini_rfc")
MINI_RFC = os.path.join(SAMPLE_DIR, "mini_rfc.txt")


@pytest.fixture
def mini_rfc_path():
    return MINI_RFC


@pytest.fixture(scope="session")
def mini_tree():
    return ingest_file(MINI_RFC)


@pytest.fixture
def offline_gateway():
    return CompletionGateway(OfflineBackend())


@pytest.fixture
def scripted_gateway():
    """Gateway over a list of canned answers, consumed in call order."""

    def make(answers, max_repairs=3):
        remaining = list(answers)

        def answer(prompt, template_id, hints):
            return remaining.pop(0)

        return CompletionGateway(CallableBackend(answer), max_repairs=max_repairs)

    return make


@pytest.fixture
def sample_dir():
    return SAMPLE_DIR


def _load_sample_config():
    from src.models.settings import RunConfig

    return RunConfig.load(os.path.join(SAMPLE_DIR, "config.json"))


@pytest.fixture
def sample_config():
    """Factory for a fresh copy of the offline sample run config."""
    return _load_sample_config


@pytest.fixture(scope="session")
def completed_run(tmp_path_factory):
    """Every stage of the offline sample run, executed once per session."""
    from src.services import pipeline

    run_dir = str(tmp_path_factory.mktemp("runs") / "mini_rfc")
    pipeline.run(_load_sample_config(), run_dir)
    return run_dir
