"""Task knowledge base records and the executable artifacts built from test cases."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .testbed import FaultCategory


@dataclass
class TaskInfo:
    """Static description of the artifact-generation task."""

    task_description: str = ""
    # Paths of the tester-script repository the core agent may import from
    repository_structure: List[str] = field(default_factory=list)
    device_inventory: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task_description": self.task_description,
            "repository_structure": list(self.repository_structure),
            "device_inventory": list(self.device_inventory),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TaskInfo":
        return cls(
            task_description=data.get("task_description", ""),
            repository_structure=data.get("repository_structure", []),
            device_inventory=data.get("device_inventory", []),
        )


@dataclass
class TaskKnowledgeBase:
    task_info: TaskInfo
    expert_heuristics: List[str] = field(default_factory=list)
    sops: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.sops:
            raise ValueError("Knowledge base needs at least one SOP step")


@dataclass
class ExperienceEntry:
    """A remembered error and how it was fixed."""

    error_signature: str
    category: FaultCategory
    resolution: str
    provenance: str = ""
    hit_count: int = 0

    def __post_init__(self):
        if self.hit_count < 0:
            raise ValueError("hit_count must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error_signature": self.error_signature,
            "category": self.category.value,
            "resolution": self.resolution,
            "provenance": self.provenance,
            "hit_count": self.hit_count,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperienceEntry":
        return cls(
            error_signature=data["error_signature"],
            category=FaultCategory(data["category"]),
            resolution=data.get("resolution", ""),
            provenance=data.get("provenance", ""),
            hit_count=data.get("hit_count", 0),
        )


@dataclass
class SummaryIndexNode:
    """Node of the hierarchical documentation index; leaves point at payloads."""

    entry_id: str
    summary: str
    children: List["SummaryIndexNode"] = field(default_factory=list)
    payload_ref: Optional[str] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def validate(self) -> None:
        seen = set()
        for node in self.iter_nodes():
            if node.entry_id in seen:
                raise ValueError(f"Index entry '{node.entry_id}' appears twice")
            seen.add(node.entry_id)
            if node.is_leaf and node is not self and not node.payload_ref:
                raise ValueError(f"Index leaf '{node.entry_id}' has no payload_ref")

    def to_dict(self) -> Dict[str, Any]:
        d: Dict[str, Any] = {"entry_id": self.entry_id, "summary": self.summary}
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        if self.payload_ref:
            d["payload_ref"] = self.payload_ref
        return d

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SummaryIndexNode":
        return cls(
            entry_id=data["entry_id"],
            summary=data.get("summary", ""),
            children=[cls.from_dict(c) for c in data.get("children", [])],
            payload_ref=data.get("payload_ref"),
        )


@dataclass
class RetrievalHit:
    entry_id: str
    path: List[str]
    payload_ref: str
    payload: str
    score: float
    low_confidence: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entry_id": self.entry_id,
            "path": list(self.path),
            "payload_ref": self.payload_ref,
            "score": round(self.score, 4),
            "low_confidence": self.low_confidence,
        }


@dataclass
class FineGrainedIntent:
    """What the script, the config and the topology each have to achieve."""

    script_intents: List[str] = field(default_factory=list)
    config_intents: List[str] = field(default_factory=list)
    topology_intents: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not (self.script_intents or self.config_intents or self.topology_intents):
            raise ValueError("FineGrainedIntent needs at least one intent")

    def prompt_text(self) -> str:
        lines = []
        for label, items in (
            ("Script", self.script_intents),
            ("Config", self.config_intents),
            ("Topology", self.topology_intents),
        ):
            for item in items:
                lines.append(f"{label}: {item}")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "script_intents": list(self.script_intents),
            "config_intents": list(self.config_intents),
            "topology_intents": list(self.topology_intents),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FineGrainedIntent":
        return cls(
            script_intents=data.get("script_intents", []),
            config_intents=data.get("config_intents", []),
            topology_intents=data.get("topology_intents", []),
        )


@dataclass
class FewShotExample:
    """A reference case with the intents that worked for it."""

    case_id: str
    case_text: str
    intents: FineGrainedIntent
    passes: int = 0
    uses: int = 0

    @property
    def pass_rate(self) -> float:
        return self.passes / self.uses if self.uses else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case_id": self.case_id,
            "case_text": self.case_text,
            "intents": self.intents.to_dict(),
            "passes": self.passes,
            "uses": self.uses,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FewShotExample":
        return cls(
            case_id=data["case_id"],
            case_text=data.get("case_text", ""),
            intents=FineGrainedIntent.from_dict(data["intents"]),
            passes=data.get("passes", 0),
            uses=data.get("uses", 0),
        )


@dataclass
class ExecutableArtifact:
    """Tester script plus DUT configuration for one test case."""

    case_id: str
    tester_script: List[str] = field(default_factory=list)
    dut_config: List[str] = field(default_factory=list)

    @property
    def script_text(self) -> str:
        return "\n".join(self.tester_script) + "\n"

    @property
    def config_text(self) -> str:
        return "\n".join(self.dut_config) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case_id": self.case_id,
            "tester_script": list(self.tester_script),
            "dut_config": list(self.dut_config),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExecutableArtifact":
        return cls(
            case_id=data["case_id"],
            tester_script=data.get("tester_script", []),
            dut_config=data.get("dut_config", []),
        )
