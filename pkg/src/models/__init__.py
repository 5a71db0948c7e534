"""Models package."""

from .settings import RunConfig, BackendDescriptor, CoverageConfig, LoopConfig, AnalysisOptions, ForgeOptions, STAGES
from .spec_tree import RawSpecDocument, TocEntry, SpecMetadata, SectionNode, SpecTree
from .analysis import Classification, AgentKind, SectionSummary, ProtocolModule, ModuleSet
from .protocol_models import (
    Origin,
    FieldSpec,
    PacketModel,
    FsmTransition,
    FsmModel,
    MessageStep,
    SequenceModel,
    ToolDescriptor,
    TestingPoint,
    ModuleModels,
)
from .testcase import CaseKind, TestCase, KeySection, BreadthReport, DepthEntry, DepthReport
from .artifact import ExecutableArtifact, ExperienceEntry, FewShotExample, FineGrainedIntent, RetrievalHit
from .testbed import EventKind, ExecutionEvent, ExecutionLog, FaultCategory, FaultProfile, InjectedFault
from .loop import EscalationTicket, LoopPass, ManualReview, Resolved, SuspectedOrigin, Disposition
from .metrics import LineSequence, MetricReport
from .manifest import RunManifest, StageRecord, StageStatus

__all__ = [
    "RunConfig",
    "BackendDescriptor",
    "CoverageConfig",
    "LoopConfig",
    "AnalysisOptions",
    "ForgeOptions",
    "STAGES",
    # Specification
    "RawSpecDocument",
    "TocEntry",
    "SpecMetadata",
    "SectionNode",
    "SpecTree",
    # Analysis and modeling
    "Classification",
    "AgentKind",
    "SectionSummary",
    "ProtocolModule",
    "ModuleSet",
    "Origin",
    "FieldSpec",
    "PacketModel",
    "FsmTransition",
    "FsmModel",
    "MessageStep",
    "SequenceModel",
    "ToolDescriptor",
    "TestingPoint",
    "ModuleModels",
    # Test cases
    "CaseKind",
    "TestCase",
    "KeySection",
    "BreadthReport",
    "DepthEntry",
    "DepthReport",
    # Artifacts and testbed
    "ExecutableArtifact",
    "ExperienceEntry",
    "FewShotExample",
    "FineGrainedIntent",
    "RetrievalHit",
    "EventKind",
    "ExecutionEvent",
    "ExecutionLog",
    "FaultCategory",
    "FaultProfile",
    "InjectedFault",
    "EscalationTicket",
    "LoopPass",
    "ManualReview",
    "Resolved",
    "SuspectedOrigin",
    "Disposition",
    # Metrics and runs
    "LineSequence",
    "MetricReport",
    "RunManifest",
    "StageRecord",
    "StageStatus",
]
