"""Run configuration: every hyperparameter of a pipeline run in one JSON file."""

import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

from ..errors import ConfigError
from ..logging_config import get_logger

logger = get_logger("settings")

# Application name for config directory
APP_NAME = "ConformanceForge"

STAGES = ["ingest", "analyze", "model", "generate", "verify", "forge", "loop", "metrics"]

BACKEND_MODES = ("live", "replay", "record", "offline")

ENV_ENDPOINT = "CONFORMANCE_FORGE_LLM_ENDPOINT"
ENV_API_KEY = "CONFORMANCE_FORGE_LLM_API_KEY"
ENV_MODEL = "CONFORMANCE_FORGE_LLM_MODEL"


def get_config_dir() -> str:
    """Get the appropriate config directory for the current platform.

    Windows: %APPDATA%/ConformanceForge
    macOS: ~/Library/Application Support/ConformanceForge
    Linux: ~/.config/ConformanceForge
    """
    if sys.platform == "win32":
        base = os.environ.get("APPDATA", os.path.expanduser("~"))
    elif sys.platform == "darwin":
        base = os.path.expanduser("~/Library/Application Support")
    else:
        base = os.environ.get("XDG_CONFIG_HOME", os.path.expanduser("~/.config"))
    return os.path.join(base, APP_NAME)


def get_default_config_path() -> str:
    """Get the full path to the user-level default run config."""
    return os.path.join(get_config_dir(), "config.json")


def _filter_known(cls, data: Dict[str, Any], what: str) -> Dict[str, Any]:
    valid_fields = {f.name for f in fields(cls)}
    filtered = {k: v for k, v in data.items() if k in valid_fields}
    if len(filtered) != len(data):
        ignored = set(data.keys()) - valid_fields
        logger.debug(f"Ignored unknown {what} keys: {ignored}")
    return filtered


@dataclass
class BackendDescriptor:
    """Which completion backend a stage talks to."""

    mode: str = "offline"
    endpoint: str = ""
    model_name: str = "offline-responder"
    transcript_path: str = ""
    temperature: float = 0.0
    # Record mode only: the backend being recorded ("live" or "offline")
    upstream: str = "live"
    api_key: str = ""
    timeout_seconds: int = 120

    def with_env(self) -> "BackendDescriptor":
        """Fill live-backend credentials from the environment where the file left them empty."""
        return BackendDescriptor(
            mode=self.mode,
            endpoint=self.endpoint or os.environ.get(ENV_ENDPOINT, ""),
            model_name=(
                os.environ.get(ENV_MODEL, self.model_name)
                if self.model_name in ("", "offline-responder") and self.mode != "offline"
                else self.model_name
            ),
            transcript_path=self.transcript_path,
            temperature=self.temperature,
            upstream=self.upstream,
            api_key=self.api_key or os.environ.get(ENV_API_KEY, ""),
            timeout_seconds=self.timeout_seconds,
        )

    def validate(self) -> None:
        if self.mode not in BACKEND_MODES:
            raise ConfigError(f"backend mode must be one of {BACKEND_MODES}, got '{self.mode}'")
        if self.mode in ("replay", "record") and not self.transcript_path:
            raise ConfigError(f"backend mode '{self.mode}' requires transcript_path")
        live_needed = self.mode == "live" or (self.mode == "record" and self.upstream == "live")
        if live_needed and not self.endpoint:
            raise ConfigError("live backend requires an endpoint (config or $" + ENV_ENDPOINT + ")")
        if self.mode == "record" and self.upstream not in ("live", "offline"):
            raise ConfigError(f"record upstream must be 'live' or 'offline', got '{self.upstream}'")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BackendDescriptor":
        return cls(**_filter_known(cls, data, "backend"))


@dataclass
class CoverageConfig:
    """Key-section selection weights, threshold and refinement targets."""

    weight_map: Dict[str, float] = field(
        default_factory=lambda: {
            "functional": 1.0,
            "configuration": 0.8,
            "descriptive": 0.4,
            "appendix": 0.2,
        }
    )
    threshold: float = 50.0
    max_refinement_rounds: int = 1
    basic_target: int = 90
    boundary_target: int = 78

    def __post_init__(self):
        for name, weight in self.weight_map.items():
            if not 0.0 <= weight <= 1.0:
                raise ConfigError(f"weight for '{name}' must be in [0, 1], got {weight}")
        if self.threshold < 0:
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}")
        if self.max_refinement_rounds < 0:
            raise ConfigError("max_refinement_rounds must be >= 0")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CoverageConfig":
        return cls(**_filter_known(cls, data, "coverage"))


@dataclass
class LoopConfig:
    """Small-loop bounds and large-loop regeneration passes."""

    max_rounds_per_attempt: int = 10
    max_attempts: int = 3
    regeneration_passes: int = 1

    def __post_init__(self):
        if self.max_rounds_per_attempt < 1 or self.max_attempts < 1:
            raise ConfigError("max_rounds_per_attempt and max_attempts must both be >= 1")
        if self.regeneration_passes < 1:
            raise ConfigError("regeneration_passes must be >= 1")

    @property
    def execution_bound(self) -> int:
        return self.max_rounds_per_attempt * self.max_attempts

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LoopConfig":
        return cls(**_filter_known(cls, data, "loop"))


@dataclass
class AnalysisOptions:
    max_repairs: int = 3
    max_module_iterations: int = 10
    exempt_zero_importance_appendix: bool = True
    strict_fsm: bool = False
    workers: int = 4

    def __post_init__(self):
        if self.max_repairs < 0:
            raise ConfigError("max_repairs must be >= 0")
        if self.max_module_iterations < 1:
            raise ConfigError("max_module_iterations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AnalysisOptions":
        return cls(**_filter_known(cls, data, "analysis"))


@dataclass
class ForgeOptions:
    similarity_cutoff: float = 0.8
    retrieval_k: int = 3
    use_fault_corrector: bool = True
    use_summarizer: bool = True
    use_orchestrator: bool = True
    few_shot_count: int = 2

    def __post_init__(self):
        if not 0.0 <= self.similarity_cutoff <= 1.0:
            raise ConfigError("similarity_cutoff must be in [0, 1]")
        if self.retrieval_k < 0:
            raise ConfigError("retrieval_k must be >= 0")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ForgeOptions":
        return cls(**_filter_known(cls, data, "forge"))


@dataclass
class RunConfig:
    """Configuration of one pipeline run.

    Relative paths are resolved against the directory of the config file
    (``config_dir``), or against the working directory for a config built in code.
    """

    spec_path: str = ""
    output_dir: str = "./runs/latest"
    kb_path: str = ""
    testbed_profile: str = ""
    answers_dir: str = ""
    external_suite: str = ""
    # Empty means every stage
    stages: List[str] = field(default_factory=list)
    backend: BackendDescriptor = field(default_factory=BackendDescriptor)
    stage_backends: Dict[str, BackendDescriptor] = field(default_factory=dict)
    coverage: CoverageConfig = field(default_factory=CoverageConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    forge: ForgeOptions = field(default_factory=ForgeOptions)
    run_id: str = ""
    config_dir: str = field(default=".", metadata={"persist": False})

    def backend_for(self, stage: str) -> BackendDescriptor:
        """Stage override if configured, else the default backend."""
        return self.stage_backends.get(stage, self.backend)

    def resolve(self, path: str) -> str:
        if not path:
            return ""
        path = os.path.expanduser(path)
        if os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.config_dir, path))

    def selected_stages(self) -> List[str]:
        if not self.stages:
            return list(STAGES)
        return [s for s in STAGES if s in self.stages]

    def validate(self) -> None:
        """Check paths and stage selection; raises ConfigError."""
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stage(s): {', '.join(unknown)}")
        selected = [STAGES.index(s) for s in self.selected_stages()]
        if selected and selected != list(range(selected[0], selected[-1] + 1)):
            raise ConfigError("stage selection must be contiguous")
        if self.selected_stages() and self.selected_stages()[0] == "ingest":
            if not self.spec_path or not os.path.isfile(self.resolve(self.spec_path)):
                raise ConfigError(f"spec file not found: {self.spec_path or '(not set)'}")
        for name in ("kb_path", "answers_dir"):
            value = getattr(self, name)
            if value and not os.path.isdir(self.resolve(value)):
                raise ConfigError(f"{name} does not exist: {value}")
        for name in ("testbed_profile", "external_suite"):
            value = getattr(self, name)
            if value and not os.path.isfile(self.resolve(value)):
                raise ConfigError(f"{name} does not exist: {value}")
        for stage, backend in [("default", self.backend)] + sorted(self.stage_backends.items()):
            try:
                backend.with_env().validate()
            except ConfigError as e:
                raise ConfigError(f"{stage} backend: {e.detail}") from e

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("config_dir", None)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], config_dir: str = ".") -> "RunConfig":
        data = _filter_known(cls, data, "config")
        data.pop("config_dir", None)
        try:
            if "backend" in data:
                data["backend"] = BackendDescriptor.from_dict(data["backend"])
            if "stage_backends" in data:
                data["stage_backends"] = {
                    stage: BackendDescriptor.from_dict(b) for stage, b in data["stage_backends"].items()
                }
            if "coverage" in data:
                data["coverage"] = CoverageConfig.from_dict(data["coverage"])
            if "loop" in data:
                data["loop"] = LoopConfig.from_dict(data["loop"])
            if "analysis" in data:
                data["analysis"] = AnalysisOptions.from_dict(data["analysis"])
            if "forge" in data:
                data["forge"] = ForgeOptions.from_dict(data["forge"])
            return cls(config_dir=config_dir, **data)
        except TypeError as e:
            raise ConfigError(f"invalid config data: {e}") from e

    @classmethod
    def load(cls, path: Optional[str] = None) -> "RunConfig":
        """Load a run config from JSON.

        Args:
            path: Path to config file. If None, uses the user-level default and
                falls back to built-in defaults when it does not exist.
        """
        explicit = path is not None
        if path is None:
            path = get_default_config_path()

        if not os.path.exists(path):
            if explicit:
                raise ConfigError(f"config file not found: {path}")
            logger.debug(f"Config file not found, using defaults: {path}")
            return cls()

        logger.debug(f"Loading config from: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in config file {path}: {e}")
            raise ConfigError(f"invalid JSON in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be an object: {path}")
        return cls.from_dict(data, config_dir=os.path.dirname(os.path.abspath(path)))

    def save(self, path: str) -> None:
        """Save the config to a JSON file."""
        dir_path = os.path.dirname(path)
        if dir_path and not os.path.exists(dir_path):
            os.makedirs(dir_path, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, ensure_ascii=False)
        logger.debug(f"Config saved to: {path}")
