"""High-level analysis products: section summaries and protocol modules."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

# Cut points for the display-only importance label
HIGH_IMPORTANCE = 67
MEDIUM_IMPORTANCE = 34


class Classification(Enum):
    """Section classification assigned during summarization."""

    FUNCTIONAL = "functional"
    DESCRIPTIVE = "descriptive"
    APPENDIX = "appendix"
    CONFIGURATION = "configuration"


class AgentKind(Enum):
    """Low-level modeling agents a module can be assigned to."""

    PACKET_FIELD = "packet_field"
    FSM = "fsm"
    TIME_SEQUENCE = "time_sequence"
    PROTOCOL_SPECIFIC = "protocol_specific"


def importance_label(importance: int) -> str:
    """Map a 0-100 importance to the high/medium/low label used for display."""
    if importance >= HIGH_IMPORTANCE:
        return "high"
    if importance >= MEDIUM_IMPORTANCE:
        return "medium"
    return "low"


@dataclass
class SectionSummary:
    """Summary of one section with its classification and test importance."""

    section_number: str
    title: str = ""
    summary: str = ""
    references: List[str] = field(default_factory=list)
    classification: Classification = Classification.DESCRIPTIVE
    test_importance: int = 0
    # References that do not resolve against the tree are kept here, not dropped
    unresolved_references: List[str] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not 0 <= self.test_importance <= 100:
            raise ValueError(f"test_importance out of range: {self.test_importance}")

    @property
    def importance_label(self) -> str:
        return importance_label(self.test_importance)

    def key_information(self) -> str:
        """Number, title, summary and importance as one prompt line."""
        return (
            f"[{self.section_number}] {self.title} (testing importance {self.test_importance}, "
            f"{self.classification.value}): {self.summary}"
        )

    def to_dict(self) -> Dict[str, Any]:
        d = {
            "section_number": self.section_number,
            "title": self.title,
            "summary": self.summary,
            "references": list(self.references),
            "classification": self.classification.value,
            "test_importance": self.test_importance,
        }
        if self.unresolved_references:
            d["unresolved_references"] = list(self.unresolved_references)
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SectionSummary":
        return cls(
            section_number=data["section_number"],
            title=data.get("title", ""),
            summary=data.get("summary", ""),
            references=data.get("references", []),
            classification=Classification(data.get("classification", "descriptive")),
            test_importance=int(data.get("test_importance", 0)),
            unresolved_references=data.get("unresolved_references", []),
            flags=data.get("flags", []),
        )


@dataclass
class ProtocolModule:
    """A group of sections covering one protocol capability."""

    module_name: str
    description: str
    assigned_agent: AgentKind
    section_numbers: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "module_name": self.module_name,
            "description": self.description,
            "assigned_agent": self.assigned_agent.value,
            "section_numbers": list(self.section_numbers),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProtocolModule":
        return cls(
            module_name=data["module_name"],
            description=data.get("description", ""),
            assigned_agent=AgentKind(data["assigned_agent"]),
            section_numbers=list(data.get("section_numbers", [])),
        )


@dataclass
class ModuleSet:
    """Result of module formation and its completion loop."""

    modules: List[ProtocolModule] = field(default_factory=list)
    iteration_count: int = 0
    uncovered_after: List[str] = field(default_factory=list)
    # Size of the uncovered set before each completion round
    uncovered_history: List[int] = field(default_factory=list)

    def covered_sections(self) -> set:
        covered = set()
        for module in self.modules:
            covered.update(module.section_numbers)
        return covered

    def module(self, name: str) -> ProtocolModule:
        for module in self.modules:
            if module.module_name == name:
                return module
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "modules": [m.to_dict() for m in self.modules],
            "iteration_count": self.iteration_count,
            "uncovered_after": list(self.uncovered_after),
            "uncovered_history": list(self.uncovered_history),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModuleSet":
        return cls(
            modules=[ProtocolModule.from_dict(m) for m in data.get("modules", [])],
            iteration_count=data.get("iteration_count", 0),
            uncovered_after=data.get("uncovered_after", []),
            uncovered_history=data.get("uncovered_history", []),
        )
