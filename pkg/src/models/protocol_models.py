"""Low-level structured protocol models and the testing points they emit."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class Origin(Enum):
    """Which kind of model a testing point (and its test case) came from."""

    FIELD = "field"
    FSM = "fsm"
    TIME_SEQUENCE = "time_sequence"
    PROTOCOL_SPECIFIC = "protocol_specific"


# Ordering of origins when enumerating testing points
ORIGIN_ORDER = [Origin.FIELD, Origin.FSM, Origin.TIME_SEQUENCE, Origin.PROTOCOL_SPECIFIC]


@dataclass
class FieldSpec:
    """One packet field with its constraints and expected response."""

    field_name: str
    offset_bits: Optional[int] = None
    width_bits: Optional[int] = None
    # Used instead of offset/width when the position is only described ("after the header")
    symbolic_position: str = ""
    value_constraints: List[str] = field(default_factory=list)
    expected_response: str = ""
    source_sections: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.width_bits is not None and self.width_bits <= 0:
            raise ValueError(f"Field {self.field_name}: width_bits must be positive")

    @property
    def position_text(self) -> str:
        if self.offset_bits is not None and self.width_bits is not None:
            return f"bits {self.offset_bits}..{self.offset_bits + self.width_bits - 1}"
        return self.symbolic_position or "unspecified"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "field_name": self.field_name,
            "offset_bits": self.offset_bits,
            "width_bits": self.width_bits,
            "symbolic_position": self.symbolic_position,
            "value_constraints": list(self.value_constraints),
            "expected_response": self.expected_response,
            "source_sections": list(self.source_sections),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FieldSpec":
        return cls(
            field_name=data["field_name"],
            offset_bits=data.get("offset_bits"),
            width_bits=data.get("width_bits"),
            symbolic_position=data.get("symbolic_position", ""),
            value_constraints=data.get("value_constraints", []),
            expected_response=data.get("expected_response", ""),
            source_sections=data.get("source_sections", []),
        )


@dataclass
class PacketModel:
    module_name: str
    fields: List[FieldSpec] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "module_name": self.module_name,
            "fields": [f.to_dict() for f in self.fields],
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PacketModel":
        return cls(
            module_name=data["module_name"],
            fields=[FieldSpec.from_dict(f) for f in data.get("fields", [])],
            flags=data.get("flags", []),
        )


@dataclass
class FsmTransition:
    source: str
    target: str
    event: str
    action: str = ""
    constraints: List[str] = field(default_factory=list)
    source_sections: List[str] = field(default_factory=list)

    @property
    def key(self) -> tuple:
        return (self.source, self.event, self.target)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "event": self.event,
            "action": self.action,
            "constraints": list(self.constraints),
            "source_sections": list(self.source_sections),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FsmTransition":
        return cls(
            source=data["source"],
            target=data["target"],
            event=data["event"],
            action=data.get("action", ""),
            constraints=data.get("constraints", []),
            source_sections=data.get("source_sections", []),
        )


@dataclass
class FsmModel:
    """States and transitions of a protocol state machine."""

    module_name: str
    states: List[str] = field(default_factory=list)
    transitions: List[FsmTransition] = field(default_factory=list)
    # States that were only referenced by transitions and promoted during integration
    inferred_states: List[str] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "module_name": self.module_name,
            "states": list(self.states),
            "inferred_states": list(self.inferred_states),
            "transitions": [t.to_dict() for t in self.transitions],
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FsmModel":
        return cls(
            module_name=data["module_name"],
            states=data.get("states", []),
            transitions=[FsmTransition.from_dict(t) for t in data.get("transitions", [])],
            inferred_states=data.get("inferred_states", []),
            flags=data.get("flags", []),
        )


@dataclass
class MessageStep:
    """One message exchanged between two roles."""

    step_id: str
    sender_role: str
    receiver_role: str
    message_type: str
    # step_ids that must happen before this one
    ordering_constraints: List[str] = field(default_factory=list)
    expected_response: str = ""
    source_sections: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step_id": self.step_id,
            "sender_role": self.sender_role,
            "receiver_role": self.receiver_role,
            "message_type": self.message_type,
            "ordering_constraints": list(self.ordering_constraints),
            "expected_response": self.expected_response,
            "source_sections": list(self.source_sections),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MessageStep":
        return cls(
            step_id=data["step_id"],
            sender_role=data.get("sender_role", ""),
            receiver_role=data.get("receiver_role", ""),
            message_type=data.get("message_type", ""),
            ordering_constraints=data.get("ordering_constraints", []),
            expected_response=data.get("expected_response", ""),
            source_sections=data.get("source_sections", []),
        )


@dataclass
class SequenceModel:
    module_name: str
    steps: List[MessageStep] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "module_name": self.module_name,
            "steps": [s.to_dict() for s in self.steps],
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SequenceModel":
        return cls(
            module_name=data["module_name"],
            steps=[MessageStep.from_dict(s) for s in data.get("steps", [])],
            flags=data.get("flags", []),
        )


@dataclass
class ToolDescriptor:
    """An auxiliary modeling tool the agents may ask for."""

    tool_name: str
    functionality: str
    input_spec: str = ""
    output_spec: str = ""

    def prompt_text(self) -> str:
        return (
            f"- {self.tool_name}: {self.functionality} "
            f"(input: {self.input_spec}; output: {self.output_spec})"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool_name": self.tool_name,
            "functionality": self.functionality,
            "input_spec": self.input_spec,
            "output_spec": self.output_spec,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ToolDescriptor":
        return cls(
            tool_name=data["tool_name"],
            functionality=data.get("functionality", ""),
            input_spec=data.get("input_spec", ""),
            output_spec=data.get("output_spec", ""),
        )


@dataclass
class TestingPoint:
    """A fine-grained, traversable test target."""

    __test__ = False  # not a pytest class

    title: str
    objective: str
    reference_sections: List[str]
    origin: Origin
    parameters: Dict[str, Any] = field(default_factory=dict)
    additional_tools_required: List[str] = field(default_factory=list)
    module_name: str = ""
    point_id: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "point_id": self.point_id,
            "title": self.title,
            "objective": self.objective,
            "parameters": dict(self.parameters),
            "reference_sections": list(self.reference_sections),
            "origin": self.origin.value,
            "additional_tools_required": list(self.additional_tools_required),
            "module_name": self.module_name,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestingPoint":
        return cls(
            point_id=data.get("point_id", ""),
            title=data["title"],
            objective=data.get("objective", ""),
            parameters=data.get("parameters", {}),
            reference_sections=data.get("reference_sections", []),
            origin=Origin(data["origin"]),
            additional_tools_required=data.get("additional_tools_required", []),
            module_name=data.get("module_name", ""),
        )


@dataclass
class ModuleModels:
    """Everything low-level modeling produced for one protocol module."""

    module_name: str
    agent: str
    packet: Optional[PacketModel] = None
    fsm: Optional[FsmModel] = None
    sequence: Optional[SequenceModel] = None
    specific_points: List[TestingPoint] = field(default_factory=list)
    # Module sections no model output referenced
    uncovered_sections: List[str] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def referenced_sections(self) -> set:
        sections = set()
        if self.packet:
            for f in self.packet.fields:
                sections.update(f.source_sections)
        if self.fsm:
            for t in self.fsm.transitions:
                sections.update(t.source_sections)
        if self.sequence:
            for s in self.sequence.steps:
                sections.update(s.source_sections)
        for p in self.specific_points:
            sections.update(p.reference_sections)
        return sections

    def to_dict(self) -> Dict[str, Any]:
        return {
            "module_name": self.module_name,
            "agent": self.agent,
            "packet": self.packet.to_dict() if self.packet else None,
            "fsm": self.fsm.to_dict() if self.fsm else None,
            "sequence": self.sequence.to_dict() if self.sequence else None,
            "specific_points": [p.to_dict() for p in self.specific_points],
            "uncovered_sections": list(self.uncovered_sections),
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModuleModels":
        return cls(
            module_name=data["module_name"],
            agent=data.get("agent", ""),
            packet=PacketModel.from_dict(data["packet"]) if data.get("packet") else None,
            fsm=FsmModel.from_dict(data["fsm"]) if data.get("fsm") else None,
            sequence=SequenceModel.from_dict(data["sequence"]) if data.get("sequence") else None,
            specific_points=[TestingPoint.from_dict(p) for p in data.get("specific_points", [])],
            uncovered_sections=data.get("uncovered_sections", []),
            flags=data.get("flags", []),
        )
