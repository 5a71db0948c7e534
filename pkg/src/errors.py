"""Exception hierarchy for the pipeline.

Every error carries its structured context as attributes so callers (and the CLI)
can report it without parsing the message.
"""

from typing import Any, List, Optional


class ForgeError(Exception):
    """Root of all pipeline errors."""


class PreconditionViolation(ForgeError, ValueError):
    """An operation was called with input that violates its precondition."""


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


class IngestError(ForgeError):
    """Failure while turning a raw document into a section tree."""


class EmptyDocument(IngestError):
    def __init__(self, source_id: str = ""):
        self.source_id = source_id
        super().__init__(f"Document '{source_id}' is blank after cleaning")


class MissingToc(IngestError):
    def __init__(self, source_id: str = ""):
        self.source_id = source_id
        super().__init__("No table-of-contents block found")


class MalformedTocEntry(IngestError):
    def __init__(self, line: str, line_number: int):
        self.line = line
        self.line_number = line_number
        super().__init__(f"Malformed table-of-contents entry at line {line_number}: {line.strip()!r}")


class SectionBodyNotFound(IngestError):
    def __init__(self, section_number: str, title: str = ""):
        self.section_number = section_number
        self.title = title
        super().__init__(f"Heading for section {section_number} ({title}) not found in the body")


# ---------------------------------------------------------------------------
# Completion gateway
# ---------------------------------------------------------------------------


class GatewayError(ForgeError):
    """Failure inside the completion gateway."""


class MissingSlot(GatewayError):
    def __init__(self, name: str, template_id: str = ""):
        self.name = name
        self.template_id = template_id
        super().__init__(f"Template '{template_id}' requires slot '{name}'")


class SchemaViolation(GatewayError):
    def __init__(
        self,
        detail: str,
        attempts: int = 0,
        template_id: str = "",
        section_number: Optional[str] = None,
    ):
        self.detail = detail
        self.attempts = attempts
        self.template_id = template_id
        self.section_number = section_number
        where = f" (section {section_number})" if section_number else ""
        super().__init__(
            f"Output of '{template_id}'{where} still invalid after {attempts} attempt(s): {detail}"
        )

    def with_section(self, section_number: str) -> "SchemaViolation":
        """Return a copy that names the section the failing prompt was about."""
        return SchemaViolation(self.detail, self.attempts, self.template_id, section_number)


class BackendUnavailable(GatewayError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"Completion backend unavailable: {detail}")


class ReplayMiss(GatewayError):
    def __init__(self, request_hash: str, template_id: str = ""):
        self.request_hash = request_hash
        self.template_id = template_id
        super().__init__(f"No recorded exchange for '{template_id}' prompt {request_hash[:12]}")


# ---------------------------------------------------------------------------
# Analysis and modeling
# ---------------------------------------------------------------------------


class AnalysisError(ForgeError):
    """Failure during high-level analysis."""


class UnknownAgent(AnalysisError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Module assigned to unknown agent '{name}'")


class ModelingError(ForgeError):
    """Failure during low-level modeling."""


class DanglingState(ModelingError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Transition references undeclared state '{name}'")


class AmbiguousTransition(ModelingError):
    def __init__(self, source: str, event: str, targets: List[str]):
        self.source = source
        self.event = event
        self.targets = targets
        super().__init__(
            f"State '{source}' on '{event}' leads to {', '.join(targets)} under the same constraints"
        )


class CyclicOrdering(ModelingError):
    def __init__(self, steps: List[str]):
        self.steps = steps
        super().__init__(f"Ordering constraints form a cycle among: {', '.join(steps)}")


class UnknownTool(ModelingError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Tool '{name}' is not in the toolkit registry")


# ---------------------------------------------------------------------------
# Coverage, forge, metrics
# ---------------------------------------------------------------------------


class CoverageError(ForgeError):
    """Failure while scoring or verifying coverage."""


class UnknownClassification(CoverageError):
    def __init__(self, classification: str):
        self.classification = classification
        super().__init__(f"No weight configured for classification '{classification}'")


class ForgeKnowledgeError(ForgeError):
    """Failure in the task knowledge base."""


class EmptyIndex(ForgeKnowledgeError):
    def __init__(self):
        super().__init__("Summary index is empty")


class AttemptsExhausted(ForgeError):
    def __init__(
        self,
        case_id: str,
        attempts: int,
        rounds: int,
        history: Optional[List[Any]] = None,
        trace: Optional[List[Any]] = None,
    ):
        self.case_id = case_id
        self.attempts = attempts
        self.rounds = rounds
        # Per-attempt records, handed to the large loop
        self.history = history or []
        self.trace = trace or []
        super().__init__(f"Case {case_id}: no passing artifact after {attempts} attempt(s) x {rounds} round(s)")


class MetricError(ForgeError):
    """Failure while computing a metric."""


class EmptyAnswer(MetricError):
    def __init__(self):
        super().__init__("Reference answer has no lines")


class DivisionByZero(MetricError, ZeroDivisionError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"Division by zero while computing {what}")


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


class PipelineError(ForgeError):
    """Failure while orchestrating pipeline stages."""


class ConfigError(PipelineError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"Invalid configuration: {detail}")


class StageFailed(PipelineError):
    def __init__(self, stage: str, cause: Any):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")


class MissingPredecessorArtifact(PipelineError):
    def __init__(self, stage: str, predecessor: str, path: str = ""):
        self.stage = stage
        self.predecessor = predecessor
        self.path = path
        super().__init__(
            f"Stage '{stage}' needs the output of '{predecessor}' which is missing or stale"
            + (f" ({path})" if path else "")
        )


class ManifestMissing(PipelineError):
    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        super().__init__(f"No run manifest in {run_dir}")
