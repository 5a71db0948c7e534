"""Feedback loop records: fault reports, attempts, escalation tickets."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .artifact import ExecutableArtifact
from .testbed import ExecutionLog, FaultCategory
from .testcase import TestCase


class SuspectedOrigin(Enum):
    DUT_DEFECT_OR_DOCS = "dut_defect_or_docs"
    TESTER_LIMITATION = "tester_limitation"
    TEST_CASE_FLAW = "test_case_flaw"


class Disposition(Enum):
    REGENERATE_CASE = "regenerate_case"
    MANUAL_REVIEW = "manual_review"


@dataclass
class FaultReport:
    """One classified failure event."""

    category: FaultCategory
    evidence: str
    source_events: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("FaultReport evidence must not be empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "category": self.category.value,
            "evidence": self.evidence,
            "source_events": list(self.source_events),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FaultReport":
        return cls(
            category=FaultCategory(data["category"]),
            evidence=data["evidence"],
            source_events=data.get("source_events", []),
        )


@dataclass
class RoundRecord:
    """Trace of one small-loop round."""

    attempt: int
    round: int
    deployment_clean: bool
    faults: List[FaultReport] = field(default_factory=list)
    fixes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "attempt": self.attempt,
            "round": self.round,
            "deployment_clean": self.deployment_clean,
            "faults": [f.to_dict() for f in self.faults],
            "fixes": list(self.fixes),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RoundRecord":
        return cls(
            attempt=data["attempt"],
            round=data["round"],
            deployment_clean=data.get("deployment_clean", False),
            faults=[FaultReport.from_dict(f) for f in data.get("faults", [])],
            fixes=data.get("fixes", []),
        )


@dataclass
class AttemptRecord:
    attempt: int
    rounds: int
    faults: List[FaultReport] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "attempt": self.attempt,
            "rounds": self.rounds,
            "faults": [f.to_dict() for f in self.faults],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AttemptRecord":
        return cls(
            attempt=data["attempt"],
            rounds=data["rounds"],
            faults=[FaultReport.from_dict(f) for f in data.get("faults", [])],
        )


@dataclass
class EscalationTicket:
    """Hand-off from the small loop to the large loop."""

    case_id: str
    suspected_origin: SuspectedOrigin
    history: List[AttemptRecord] = field(default_factory=list)
    disposition: Disposition = Disposition.REGENERATE_CASE
    regeneration_passes: int = 0
    trace: List[RoundRecord] = field(default_factory=list)

    @property
    def total_rounds(self) -> int:
        return sum(a.rounds for a in self.history)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case_id": self.case_id,
            "suspected_origin": self.suspected_origin.value,
            "history": [a.to_dict() for a in self.history],
            "disposition": self.disposition.value,
            "regeneration_passes": self.regeneration_passes,
            "trace": [r.to_dict() for r in self.trace],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EscalationTicket":
        return cls(
            case_id=data["case_id"],
            suspected_origin=SuspectedOrigin(data["suspected_origin"]),
            history=[AttemptRecord.from_dict(a) for a in data.get("history", [])],
            disposition=Disposition(data.get("disposition", "regenerate_case")),
            regeneration_passes=data.get("regeneration_passes", 0),
            trace=[RoundRecord.from_dict(r) for r in data.get("trace", [])],
        )


@dataclass
class LoopState:
    attempt: int = 1
    round: int = 0
    last_artifact: Optional[ExecutableArtifact] = None
    last_log: Optional[ExecutionLog] = None


@dataclass
class LoopPass:
    """Small loop succeeded."""

    artifact: ExecutableArtifact
    rounds: int
    attempt: int
    trace: List[RoundRecord] = field(default_factory=list)

    @property
    def total_executions(self) -> int:
        return len(self.trace)


@dataclass
class Resolved:
    """Large loop produced regenerated cases that pass."""

    ticket: EscalationTicket
    new_cases: List[TestCase] = field(default_factory=list)
    passes: List[LoopPass] = field(default_factory=list)


@dataclass
class ManualReview:
    """Large loop gave up; a human has to look at the case."""

    ticket: EscalationTicket
    attempted_cases: List[TestCase] = field(default_factory=list)
