"""Output schemas the gateway validates model answers against.

Extra keys are preserved (``extra="allow"``) so chatty answers still validate.
"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _Answer(BaseModel):
    model_config = ConfigDict(extra="allow")


# Summaries -------------------------------------------------------------------


class SummaryOut(_Answer):
    summary: str
    references: List[str] = Field(default_factory=list)
    classification: Literal["functional", "descriptive", "appendix", "configuration"]
    test_importance: int = Field(ge=0, le=100)


class ProtocolSummaryOut(_Answer):
    protocol_summary: str = Field(min_length=1)


# Modules ---------------------------------------------------------------------


class ModuleOut(_Answer):
    module_name: str = Field(min_length=1)
    description: str = ""
    # Checked against the agent catalog by the caller, not here
    assigned_agent: str
    section_numbers: List[str] = Field(min_length=1)


class ModuleFormationOut(_Answer):
    modules: List[ModuleOut] = Field(default_factory=list)


# Low-level models ------------------------------------------------------------


class FieldOut(_Answer):
    field_name: str = Field(min_length=1)
    offset_bits: Optional[int] = Field(default=None, ge=0)
    width_bits: Optional[int] = Field(default=None, gt=0)
    symbolic_position: str = ""
    value_constraints: List[str] = Field(default_factory=list)
    expected_response: str = ""
    source_sections: List[str] = Field(default_factory=list)


class FieldModelOut(_Answer):
    fields: List[FieldOut] = Field(default_factory=list)


class TransitionOut(_Answer):
    source: str = Field(min_length=1)
    target: str = Field(min_length=1)
    event: str = Field(min_length=1)
    action: str = ""
    constraints: List[str] = Field(default_factory=list)
    source_sections: List[str] = Field(default_factory=list)


class FsmOut(_Answer):
    states: List[str] = Field(default_factory=list)
    transitions: List[TransitionOut] = Field(default_factory=list)


class StepOut(_Answer):
    step_id: str = Field(min_length=1)
    sender_role: str = ""
    receiver_role: str = ""
    message_type: str = Field(min_length=1)
    ordering_constraints: List[str] = Field(default_factory=list)
    expected_response: str = ""
    source_sections: List[str] = Field(default_factory=list)


class SequenceOut(_Answer):
    steps: List[StepOut] = Field(default_factory=list)


class PointOut(_Answer):
    title: str = Field(min_length=1)
    objective: str = Field(min_length=1)
    parameters: Dict[str, object] = Field(default_factory=dict)
    reference_sections: List[str] = Field(default_factory=list)
    additional_tools_required: List[str] = Field(default_factory=list)


class PointsOut(_Answer):
    testing_points: List[PointOut] = Field(default_factory=list)


# Test cases and coverage -----------------------------------------------------


class CaseOut(_Answer):
    title: str = Field(min_length=1)
    objective: str = ""
    steps: List[str] = Field(min_length=1)
    expected_results: List[str] = Field(min_length=1)
    reference_sections: List[str] = Field(min_length=1)
    topology: str = ""
    parameters: Dict[str, object] = Field(default_factory=dict)


class CasesOut(_Answer):
    test_cases: List[CaseOut] = Field(default_factory=list)


class DepthOut(_Answer):
    basic_function_score: int = Field(ge=0, le=100)
    boundary_case_score: int = Field(ge=0, le=100)
    rationale: str = ""
    suggestions: List[str] = Field(default_factory=list)


# Artifact generation ---------------------------------------------------------


class IntentOut(_Answer):
    script_intents: List[str] = Field(default_factory=list)
    config_intents: List[str] = Field(default_factory=list)
    topology_intents: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _at_least_one(self) -> "IntentOut":
        if not (self.script_intents or self.config_intents or self.topology_intents):
            raise ValueError("at least one intent list must be non-empty")
        return self


class ArtifactOut(_Answer):
    tester_script: List[str] = Field(min_length=1)
    dut_config: List[str] = Field(default_factory=list)
