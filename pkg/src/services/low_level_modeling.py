"""Stage 2: turn protocol modules into structured models and testing points."""

import json
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

from ..data import data_path
from ..errors import AmbiguousTransition, CyclicOrdering, DanglingState, SchemaViolation
from ..logging_config import get_logger
from ..models.analysis import AgentKind, ProtocolModule, SectionSummary
from ..models.protocol_models import (
    ORIGIN_ORDER,
    FieldSpec,
    FsmModel,
    FsmTransition,
    MessageStep,
    ModuleModels,
    Origin,
    PacketModel,
    SequenceModel,
    TestingPoint,
)
from ..models.spec_tree import SectionNode, SpecTree, section_sort_key
from .llm_gateway import CompletionGateway
from .schemas import FieldModelOut, FsmOut, PointsOut, SequenceOut
from .toolkit import Toolkit

logger = get_logger("low_level_modeling")

EMPTY_MODEL = "empty_model"
AMBIGUOUS_TRANSITION = "ambiguous_transition"

_keywords: Optional[Dict[str, List[str]]] = None


def modeling_keywords() -> Dict[str, List[str]]:
    global _keywords
    if _keywords is None:
        with open(data_path("modeling_keywords.json"), "r", encoding="utf-8") as f:
            _keywords = json.load(f)
    return _keywords


def _module_nodes(module: ProtocolModule, tree: SpecTree) -> List[SectionNode]:
    return [tree.node(n) for n in module.section_numbers if tree.resolves(n) and tree.node(n).is_content_bearing]


def _resolvable(numbers: List[str], tree: SpecTree, fallback: List[str]) -> List[str]:
    kept = []
    for number in numbers:
        number = number.strip()
        if tree.resolves(number) and number not in kept:
            kept.append(number)
    return kept or list(fallback)


def _union(target: List[str], extra: List[str]) -> None:
    for item in extra:
        if item not in target:
            target.append(item)


def header_first(nodes: List[SectionNode], keywords: Optional[List[str]] = None) -> List[SectionNode]:
    """Sections whose titles name a header or packet format first, then document order."""
    keywords = [k.lower() for k in (keywords or modeling_keywords()["header_keywords"])]

    def rank(node: SectionNode) -> int:
        title = node.title.lower()
        return 0 if any(k in title for k in keywords) else 1

    return sorted(nodes, key=rank)


# ---------------------------------------------------------------------------
# Packet fields
# ---------------------------------------------------------------------------


def model_fields(
    module: ProtocolModule, tree: SpecTree, gateway: CompletionGateway, protocol_summary: str = ""
) -> PacketModel:
    model = PacketModel(module_name=module.module_name)
    for node in header_first(_module_nodes(module, tree)):
        previous = "\n".join(
            f"- {f.field_name} ({f.position_text}): {'; '.join(f.value_constraints)}" for f in model.fields
        )
        prompt = gateway.render(
            "field_modeling",
            protocol_summary=protocol_summary,
            module_name=module.module_name,
            module_description=module.description,
            previous_fields=previous or "(none yet)",
            section_number=node.number,
            section_title=node.title,
            section_content=node.content,
        )
        try:
            out = gateway.complete_structured(
                prompt,
                FieldModelOut,
                template_id="field_modeling",
                hints={"section_number": node.number, "title": node.title, "content": node.content},
            )
        except SchemaViolation as e:
            raise e.with_section(node.number) from e

        for item in out.fields:
            spec = FieldSpec(
                field_name=item.field_name.strip(),
                offset_bits=item.offset_bits,
                width_bits=item.width_bits,
                symbolic_position=item.symbolic_position,
                value_constraints=list(item.value_constraints),
                expected_response=item.expected_response,
                source_sections=_resolvable(item.source_sections, tree, [node.number]),
            )
            existing = next((f for f in model.fields if f.field_name == spec.field_name), None)
            if existing is None:
                model.fields.append(spec)
            else:
                _union(existing.value_constraints, spec.value_constraints)
                _union(existing.source_sections, spec.source_sections)
                existing.expected_response = existing.expected_response or spec.expected_response

    if not model.fields:
        model.flags.append(EMPTY_MODEL)
        logger.warning(f"Module '{module.module_name}': no packet fields extracted")
    return model


# ---------------------------------------------------------------------------
# State machine
# ---------------------------------------------------------------------------


def integrate_fsm(model: FsmModel, out: FsmOut, tree: SpecTree, default_sections: List[str]) -> int:
    """Merge one answer into the model; returns the number of new transitions.

    Transitions with the same (source, event, target) are merged, constraints by union.
    """
    for state in out.states:
        state = state.strip()
        if state and state not in model.states:
            model.states.append(state)
    added = 0
    index = {t.key: t for t in model.transitions}
    for item in out.transitions:
        transition = FsmTransition(
            source=item.source.strip(),
            target=item.target.strip(),
            event=item.event.strip(),
            action=item.action.strip(),
            constraints=list(item.constraints),
            source_sections=_resolvable(item.source_sections, tree, default_sections),
        )
        existing = index.get(transition.key)
        if existing is None:
            model.transitions.append(transition)
            index[transition.key] = transition
            added += 1
        else:
            _union(existing.constraints, transition.constraints)
            _union(existing.source_sections, transition.source_sections)
            existing.action = existing.action or transition.action
    return added


def check_guards(model: FsmModel, strict: bool = False) -> List[FsmTransition]:
    """Drop transitions that repeat an earlier (source, event) under the same constraints.

    The first one extracted wins; the dropped ones are flagged and returned.
    Raises AmbiguousTransition instead when strict.
    """
    first: Dict[tuple, FsmTransition] = {}
    kept, dropped = [], []
    for t in model.transitions:
        guard = (t.source, t.event, frozenset(t.constraints))
        winner = first.get(guard)
        if winner is None:
            first[guard] = t
            kept.append(t)
            continue
        if strict:
            raise AmbiguousTransition(t.source, t.event, [winner.target, t.target])
        logger.warning(
            f"FSM {model.module_name}: {t.source} --[{t.event}]--> {t.target} conflicts with "
            f"--> {winner.target} under the same constraints; dropped"
        )
        model.flags.append(f"{AMBIGUOUS_TRANSITION}: {t.source} --[{t.event}]--> {t.target}")
        dropped.append(t)
    model.transitions = kept
    return dropped


def _fsm_text(model: FsmModel) -> str:
    if not model.states and not model.transitions:
        return "(empty)"
    lines = [f"States: {', '.join(model.states)}"]
    for t in model.transitions:
        lines.append(f"- {t.source} --[{t.event}]--> {t.target}: {t.action}")
    return "\n".join(lines)


def _fsm_hints(model: FsmModel, node: Optional[SectionNode], content: str, step: str) -> dict:
    return {
        "step": step,
        "section_number": node.number if node else "",
        "content": content,
        "states": list(model.states),
    }


def model_fsm(
    module: ProtocolModule,
    tree: SpecTree,
    gateway: CompletionGateway,
    protocol_summary: str = "",
    strict: bool = False,
) -> FsmModel:
    """Four-step extraction: framework pass, per-section pass, per-section refinement, integration."""
    model = FsmModel(module_name=module.module_name)
    nodes = _module_nodes(module, tree)
    module_content = "\n\n".join(f"{n.heading}\n{n.content}" for n in nodes)

    prompt = gateway.render(
        "fsm_framework",
        protocol_summary=protocol_summary,
        module_name=module.module_name,
        module_content=module_content,
    )
    out = gateway.complete_structured(
        prompt, FsmOut, template_id="fsm_framework", hints=_fsm_hints(model, None, module_content, "framework")
    )
    integrate_fsm(model, out, tree, [])

    passes = (
        ("extract", "Traverse the section and extract its states and transitions."),
        ("refine", "Re-read the section and supplement or correct the integrated model."),
    )
    for node in nodes:
        for step, instruction in passes:
            prompt = gateway.render(
                "fsm_section",
                module_name=module.module_name,
                current_model=_fsm_text(model),
                pass_instruction=instruction,
                section_number=node.number,
                section_title=node.title,
                section_content=node.content,
            )
            try:
                out = gateway.complete_structured(
                    prompt, FsmOut, template_id="fsm_section", hints=_fsm_hints(model, node, node.content, step)
                )
            except SchemaViolation as e:
                raise e.with_section(node.number) from e
            added = integrate_fsm(model, out, tree, [node.number])
            logger.debug(f"FSM {module.module_name} {step} {node.number}: +{added} transitions")

    fallback = [n.number for n in nodes] or list(module.section_numbers)
    for transition in model.transitions:
        if not transition.source_sections:
            transition.source_sections = list(fallback)
        for state in (transition.source, transition.target):
            if state in model.states:
                continue
            if strict:
                raise DanglingState(state)
            logger.warning(f"FSM {module.module_name}: state '{state}' was never declared; promoted")
            model.states.append(state)
            model.inferred_states.append(state)

    check_guards(model, strict)

    if not model.transitions:
        model.flags.append(EMPTY_MODEL)
        logger.warning(f"Module '{module.module_name}': no transitions extracted")
    return model


# ---------------------------------------------------------------------------
# Message sequences
# ---------------------------------------------------------------------------


def order_steps(steps: List[MessageStep]) -> List[MessageStep]:
    """Topological order of the steps; ties keep extraction order."""
    ids = {s.step_id for s in steps}
    pending = {s.step_id: {c for c in s.ordering_constraints if c in ids and c != s.step_id} for s in steps}
    for step in steps:
        unknown = [c for c in step.ordering_constraints if c not in ids]
        if unknown:
            logger.warning(f"Step {step.step_id} is ordered after unknown step(s) {', '.join(unknown)}; ignored")
    ordered: List[MessageStep] = []
    done: set = set()
    remaining = list(steps)
    while remaining:
        ready = next((s for s in remaining if pending[s.step_id] <= done), None)
        if ready is None:
            raise CyclicOrdering([s.step_id for s in remaining])
        ordered.append(ready)
        done.add(ready.step_id)
        remaining.remove(ready)
    return ordered


def model_sequence(
    module: ProtocolModule, tree: SpecTree, gateway: CompletionGateway, protocol_summary: str = ""
) -> SequenceModel:
    model = SequenceModel(module_name=module.module_name)
    for node in _module_nodes(module, tree):
        previous = "\n".join(
            f"- {s.step_id}: {s.sender_role} -> {s.receiver_role}: {s.message_type}" for s in model.steps
        )
        prompt = gateway.render(
            "sequence_modeling",
            protocol_summary=protocol_summary,
            module_name=module.module_name,
            module_description=module.description,
            previous_steps=previous or "(none yet)",
            section_number=node.number,
            section_title=node.title,
            section_content=node.content,
        )
        try:
            out = gateway.complete_structured(
                prompt,
                SequenceOut,
                template_id="sequence_modeling",
                hints={
                    "section_number": node.number,
                    "content": node.content,
                    "step_count": len(model.steps),
                },
            )
        except SchemaViolation as e:
            raise e.with_section(node.number) from e

        for item in out.steps:
            step = MessageStep(
                step_id=item.step_id.strip(),
                sender_role=item.sender_role,
                receiver_role=item.receiver_role,
                message_type=item.message_type,
                ordering_constraints=list(item.ordering_constraints),
                expected_response=item.expected_response,
                source_sections=_resolvable(item.source_sections, tree, [node.number]),
            )
            existing = next((s for s in model.steps if s.step_id == step.step_id), None)
            if existing is None:
                model.steps.append(step)
            else:
                _union(existing.ordering_constraints, step.ordering_constraints)
                _union(existing.source_sections, step.source_sections)

    model.steps = order_steps(model.steps)
    if not model.steps:
        model.flags.append(EMPTY_MODEL)
        logger.warning(f"Module '{module.module_name}': no message steps extracted")
    return model


# ---------------------------------------------------------------------------
# Protocol-specific points
# ---------------------------------------------------------------------------


def model_protocol_specific(
    module: ProtocolModule,
    tree: SpecTree,
    toolkit: Toolkit,
    gateway: CompletionGateway,
    summaries: Optional[Dict[str, SectionSummary]] = None,
    protocol_summary: str = "",
    flags: Optional[List[str]] = None,
) -> List[TestingPoint]:
    """Focus-moving traversal: one full section per prompt, the rest as summaries."""
    summaries = summaries or {}
    points: List[TestingPoint] = []
    for node in _module_nodes(module, tree):
        others = [
            summaries[n].key_information() if n in summaries else f"[{n}] {tree.node(n).title}"
            for n in module.section_numbers
            if n != node.number and tree.resolves(n)
        ]
        prompt = gateway.render(
            "protocol_specific",
            protocol_summary=protocol_summary,
            module_name=module.module_name,
            module_description=module.description,
            other_summaries="\n".join(others) or "(none)",
            toolkit=toolkit.prompt_text(),
            section_number=node.number,
            section_title=node.title,
            section_content=node.content,
        )
        try:
            out = gateway.complete_structured(
                prompt,
                PointsOut,
                template_id="protocol_specific",
                hints={"section_number": node.number, "title": node.title, "content": node.content},
            )
        except SchemaViolation as e:
            raise e.with_section(node.number) from e

        for item in out.testing_points:
            tools = [t.strip() for t in item.additional_tools_required if t.strip()]
            for tool in tools:
                if tool not in toolkit:
                    logger.warning(f"Point '{item.title}' asks for unknown tool '{tool}'")
                    if flags is not None:
                        flags.append(f"unknown_tool:{tool}")
            points.append(
                TestingPoint(
                    title=item.title.strip(),
                    objective=item.objective.strip(),
                    parameters=dict(item.parameters),
                    reference_sections=_resolvable(item.reference_sections, tree, [node.number]),
                    origin=Origin.PROTOCOL_SPECIFIC,
                    additional_tools_required=tools,
                    module_name=module.module_name,
                )
            )
    return points


# ---------------------------------------------------------------------------
# Per-module dispatch and point enumeration
# ---------------------------------------------------------------------------


def model_module(
    module: ProtocolModule,
    tree: SpecTree,
    gateway: CompletionGateway,
    toolkit: Toolkit,
    summaries: Optional[Dict[str, SectionSummary]] = None,
    protocol_summary: str = "",
    strict_fsm: bool = False,
) -> ModuleModels:
    result = ModuleModels(module_name=module.module_name, agent=module.assigned_agent.value)
    agent = module.assigned_agent
    if agent == AgentKind.PACKET_FIELD:
        result.packet = model_fields(module, tree, gateway, protocol_summary)
    elif agent == AgentKind.FSM:
        result.fsm = model_fsm(module, tree, gateway, protocol_summary, strict=strict_fsm)
    elif agent == AgentKind.TIME_SEQUENCE:
        result.sequence = model_sequence(module, tree, gateway, protocol_summary)
    else:
        result.specific_points = model_protocol_specific(
            module, tree, toolkit, gateway, summaries, protocol_summary, flags=result.flags
        )

    referenced = result.referenced_sections()
    result.uncovered_sections = [n.number for n in _module_nodes(module, tree) if n.number not in referenced]
    if result.uncovered_sections:
        logger.warning(
            f"Module '{module.module_name}': no model output for section(s) {', '.join(result.uncovered_sections)}"
        )
    return result


def model_all(
    modules: List[ProtocolModule],
    tree: SpecTree,
    gateway: CompletionGateway,
    toolkit: Toolkit,
    summaries: Optional[Dict[str, SectionSummary]] = None,
    protocol_summary: str = "",
    strict_fsm: bool = False,
    workers: int = 4,
) -> List[ModuleModels]:
    """Model every module; modules run in parallel, results keep module order."""

    def run(module: ProtocolModule) -> ModuleModels:
        logger.debug(f"Modeling module '{module.module_name}' with the {module.assigned_agent.value} agent")
        return model_module(module, tree, gateway, toolkit, summaries, protocol_summary, strict_fsm)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, modules))
    logger.info(f"Modeled {len(results)} modules")
    return results


def _field_point(spec: FieldSpec, module_name: str) -> TestingPoint:
    constraints = "; ".join(spec.value_constraints) or "the defined format"
    objective = f"Verify that the DUT enforces the {spec.field_name} field ({spec.position_text}): {constraints}."
    if spec.expected_response:
        objective += f" Expected: {spec.expected_response}"
    return TestingPoint(
        title=f"Field {spec.field_name} validation",
        objective=objective,
        parameters={
            "field": spec.field_name,
            "offset_bits": spec.offset_bits,
            "width_bits": spec.width_bits,
            "constraints": list(spec.value_constraints),
        },
        reference_sections=list(spec.source_sections),
        origin=Origin.FIELD,
        module_name=module_name,
    )


def _transition_point(t: FsmTransition, module_name: str) -> TestingPoint:
    objective = f"Verify that in the {t.source} state, {t.event} makes the DUT {t.action or 'react'} and enter the {t.target} state."
    if t.constraints:
        objective += f" Constraints: {'; '.join(t.constraints)}."
    return TestingPoint(
        title=f"Transition {t.source} -> {t.target} on {t.event}",
        objective=objective,
        parameters={"source": t.source, "target": t.target, "event": t.event},
        reference_sections=list(t.source_sections),
        origin=Origin.FSM,
        module_name=module_name,
    )


def _step_point(s: MessageStep, module_name: str) -> TestingPoint:
    objective = f"Verify that when the {s.sender_role} sends a {s.message_type} message to the {s.receiver_role}, {s.expected_response or 'it is processed'}."
    return TestingPoint(
        title=f"Sequence step {s.step_id}: {s.message_type} from {s.sender_role}",
        objective=objective,
        parameters={
            "message_type": s.message_type,
            "sender_role": s.sender_role,
            "receiver_role": s.receiver_role,
            "after": list(s.ordering_constraints),
        },
        reference_sections=list(s.source_sections),
        origin=Origin.TIME_SEQUENCE,
        module_name=module_name,
    )


def enumerate_points(models: List[ModuleModels]) -> List[TestingPoint]:
    """One point per field, transition, message step and protocol-specific point.

    Ordered by origin, then first source section; ties keep module and model order.
    Point ids are assigned in that order.
    """
    points: List[TestingPoint] = []
    for mm in models:
        if mm.packet:
            points.extend(_field_point(f, mm.module_name) for f in mm.packet.fields)
        if mm.fsm:
            points.extend(_transition_point(t, mm.module_name) for t in mm.fsm.transitions)
        if mm.sequence:
            points.extend(_step_point(s, mm.module_name) for s in mm.sequence.steps)
        points.extend(mm.specific_points)

    def key(point: TestingPoint):
        first = point.reference_sections[0] if point.reference_sections else ""
        return (ORIGIN_ORDER.index(point.origin), section_sort_key(first) if first else ())

    ordered = sorted(points, key=key)
    result = []
    for i, point in enumerate(ordered, 1):
        result.append(TestingPoint.from_dict({**point.to_dict(), "point_id": f"P-{i:04d}"}))
    return result
