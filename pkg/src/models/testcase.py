"""Test cases and their coverage verification reports."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class CaseKind(Enum):
    """Why a test case was generated."""

    INITIAL = "initial"
    BREADTH_SUPPLEMENT = "breadth_supplement"
    DEPTH_SUPPLEMENT = "depth_supplement"
    REGENERATED = "regenerated"


@dataclass
class TestCase:
    """A natural-language conformance test case."""

    __test__ = False  # not a pytest class

    case_id: str
    title: str
    objective: str
    steps: List[str]
    expected_results: List[str]
    reference_sections: List[str]
    topology: str = ""
    parameters: Dict[str, Any] = field(default_factory=dict)
    origin: str = ""
    module_name: str = ""
    point_id: str = ""
    kind: CaseKind = CaseKind.INITIAL
    refinement_round: int = 0
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        d = {
            "case_id": self.case_id,
            "title": self.title,
            "objective": self.objective,
            "steps": list(self.steps),
            "expected_results": list(self.expected_results),
            "reference_sections": list(self.reference_sections),
            "topology": self.topology,
            "parameters": dict(self.parameters),
            "origin": self.origin,
            "module_name": self.module_name,
            "point_id": self.point_id,
            "kind": self.kind.value,
            "refinement_round": self.refinement_round,
        }
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestCase":
        return cls(
            case_id=data["case_id"],
            title=data.get("title", ""),
            objective=data.get("objective", ""),
            steps=list(data.get("steps", [])),
            expected_results=list(data.get("expected_results", [])),
            reference_sections=list(data.get("reference_sections", [])),
            topology=data.get("topology", ""),
            parameters=data.get("parameters", {}),
            origin=data.get("origin", ""),
            module_name=data.get("module_name", ""),
            point_id=data.get("point_id", ""),
            kind=CaseKind(data.get("kind", "initial")),
            refinement_round=data.get("refinement_round", 0),
            flags=data.get("flags", []),
        )

    def prompt_text(self) -> str:
        """Compact multi-line rendering used inside prompts."""
        lines = [f"{self.case_id}: {self.title}", f"Objective: {self.objective}"]
        if self.topology:
            lines.append(f"Topology: {self.topology}")
        for i, step in enumerate(self.steps, 1):
            lines.append(f"Step {i}: {step}")
        for i, result in enumerate(self.expected_results, 1):
            lines.append(f"Expected {i}: {result}")
        lines.append(f"Sections: {', '.join(self.reference_sections)}")
        return "\n".join(lines)


@dataclass
class KeySection:
    section_number: str
    score: float

    def to_dict(self) -> Dict[str, Any]:
        return {"section_number": self.section_number, "score": self.score}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KeySection":
        return cls(section_number=data["section_number"], score=data["score"])


@dataclass
class BreadthReport:
    """Which key sections the suite references."""

    key_sections: List[KeySection] = field(default_factory=list)
    covered: List[str] = field(default_factory=list)
    coverage_rate: float = 0.0
    flags: List[str] = field(default_factory=list)

    @property
    def uncovered(self) -> List[str]:
        covered = set(self.covered)
        return [k.section_number for k in self.key_sections if k.section_number not in covered]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "key_sections": [k.to_dict() for k in self.key_sections],
            "covered": list(self.covered),
            "uncovered": self.uncovered,
            "coverage_rate": self.coverage_rate,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BreadthReport":
        return cls(
            key_sections=[KeySection.from_dict(k) for k in data.get("key_sections", [])],
            covered=data.get("covered", []),
            coverage_rate=data.get("coverage_rate", 0.0),
            flags=data.get("flags", []),
        )


@dataclass
class DepthEntry:
    """Judge verdict for one key section."""

    section_number: str
    basic_function_score: int
    boundary_case_score: int
    rationale: str = ""
    suggestions: List[str] = field(default_factory=list)
    case_count: int = 0

    def __post_init__(self):
        for name in ("basic_function_score", "boundary_case_score"):
            value = getattr(self, name)
            if not 0 <= value <= 100:
                raise ValueError(f"{name} out of range for section {self.section_number}: {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "section_number": self.section_number,
            "basic_function_score": self.basic_function_score,
            "boundary_case_score": self.boundary_case_score,
            "rationale": self.rationale,
            "suggestions": list(self.suggestions),
            "case_count": self.case_count,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DepthEntry":
        return cls(
            section_number=data["section_number"],
            basic_function_score=data["basic_function_score"],
            boundary_case_score=data["boundary_case_score"],
            rationale=data.get("rationale", ""),
            suggestions=data.get("suggestions", []),
            case_count=data.get("case_count", 0),
        )


@dataclass
class DepthReport:
    entries: List[DepthEntry] = field(default_factory=list)

    def entry(self, section_number: str) -> Optional[DepthEntry]:
        for e in self.entries:
            if e.section_number == section_number:
                return e
        return None

    @property
    def mean_basic(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.basic_function_score for e in self.entries) / len(self.entries)

    @property
    def mean_boundary(self) -> float:
        if not self.entries:
            return 0.0
        return sum(e.boundary_case_score for e in self.entries) / len(self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "mean_basic_function_score": round(self.mean_basic, 2),
            "mean_boundary_case_score": round(self.mean_boundary, 2),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DepthReport":
        return cls(entries=[DepthEntry.from_dict(e) for e in data.get("entries", [])])
