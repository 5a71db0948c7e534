"""Stage 1: section summaries, protocol summary and protocol module formation."""

from typing import Dict, List, Optional

from ..errors import SchemaViolation, UnknownAgent
from ..logging_config import get_logger
from ..models.analysis import AgentKind, Classification, ModuleSet, ProtocolModule, SectionSummary
from ..models.spec_tree import SectionNode, SpecTree, section_sort_key
from .llm_gateway import CompletionGateway
from .schemas import ModuleFormationOut, ModuleOut, ProtocolSummaryOut, SummaryOut

logger = get_logger("high_level_analysis")

EMPTY_BODY = "empty_body"

AGENT_CATALOG: Dict[AgentKind, str] = {
    AgentKind.PACKET_FIELD: (
        "Packet-field agent: models message formats field by field (position, width, allowed values, "
        "reaction to invalid values). Use for sections defining headers and packet layouts."
    ),
    AgentKind.FSM: (
        "FSM agent: extracts protocol states and the transitions between them (source, target, event, "
        "action, constraints). Use for sections describing states, events and state changes."
    ),
    AgentKind.TIME_SEQUENCE: (
        "Time-sequence agent: models the order of messages exchanged between devices, timers and the "
        "expected responses. Use for sections describing message exchanges and timing."
    ),
    AgentKind.PROTOCOL_SPECIFIC: (
        "Protocol-specific agent: extracts testing points from any remaining normative text, with optional "
        "auxiliary tools. Use for rules that fit none of the other agents."
    ),
}


def agent_catalog_text(catalog: Dict[AgentKind, str]) -> str:
    return "\n".join(f"- {kind.value}: {text}" for kind, text in catalog.items())


def _node_hints(node: SectionNode) -> Dict[str, str]:
    return {"section_number": node.number, "title": node.title, "content": node.content}


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def summarize_sections(tree: SpecTree, gateway: CompletionGateway) -> Dict[str, SectionSummary]:
    """Summarize every section in pre-order.

    Each prompt carries the spec title, the table of contents and all summaries
    produced before it, so the traversal is strictly sequential.
    """
    summaries: Dict[str, SectionSummary] = {}
    previous: List[str] = []
    toc = tree.metadata.toc_text()

    for node in tree.preorder():
        if not node.is_content_bearing:
            summary = SectionSummary(
                section_number=node.number,
                title=node.title,
                summary=f"Section {node.number} ({node.title}) only groups its subsections.",
                classification=Classification.DESCRIPTIVE,
                test_importance=0,
                flags=[EMPTY_BODY],
            )
        else:
            prompt = gateway.render(
                "section_summary",
                spec_title=tree.metadata.title,
                toc=toc,
                previous_summaries="\n".join(previous) or "(none yet)",
                section_number=node.number,
                section_title=node.title,
                section_content=node.content,
            )
            try:
                out = gateway.complete_structured(
                    prompt, SummaryOut, template_id="section_summary", hints=_node_hints(node)
                )
            except SchemaViolation as e:
                raise e.with_section(node.number) from e
            summary = _to_summary(node, out, tree)

        summaries[node.number] = summary
        previous.append(summary.key_information())
        logger.debug(
            f"Summarized {node.number}: {summary.classification.value}, importance {summary.test_importance}"
        )

    logger.info(f"Summarized {len(summaries)} sections")
    return summaries


def _to_summary(node: SectionNode, out: SummaryOut, tree: SpecTree) -> SectionSummary:
    resolved, unresolved = [], []
    for ref in out.references:
        ref = ref.strip().rstrip(".")
        if ref.lower().startswith("section "):
            ref = ref[len("section "):].strip()
        if not ref or ref == node.number or ref in resolved or ref in unresolved:
            continue
        (resolved if tree.resolves(ref) else unresolved).append(ref)
    flags = []
    if unresolved:
        flags.append("unresolved_references")
        logger.warning(f"Section {node.number} references unknown section(s): {', '.join(unresolved)}")
    return SectionSummary(
        section_number=node.number,
        title=node.title,
        summary=out.summary.strip(),
        references=resolved,
        classification=Classification(out.classification),
        test_importance=out.test_importance,
        unresolved_references=unresolved,
        flags=flags,
    )


def summarize_protocol(tree: SpecTree, summaries: Dict[str, SectionSummary], gateway: CompletionGateway) -> str:
    """One-paragraph protocol summary used as context by later stages."""
    top = [summaries[r.number].key_information() for r in tree.roots if r.number in summaries]
    prompt = gateway.render(
        "protocol_summary",
        spec_title=tree.metadata.title,
        abstract=tree.metadata.abstract,
        top_summaries="\n".join(top),
    )
    out = gateway.complete_structured(
        prompt,
        ProtocolSummaryOut,
        template_id="protocol_summary",
        hints={
            "title": tree.metadata.title,
            "abstract": tree.metadata.abstract,
            "summaries": [summaries[r.number].summary for r in tree.roots if r.number in summaries],
        },
    )
    return out.protocol_summary.strip()


# ---------------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------------


def _key_information(numbers: List[str], summaries: Dict[str, SectionSummary]) -> str:
    return "\n".join(summaries[n].key_information() for n in numbers if n in summaries)


def _section_hints(numbers: List[str], tree: SpecTree, summaries: Dict[str, SectionSummary]) -> List[dict]:
    hints = []
    for number in numbers:
        node = tree.node(number)
        summary = summaries.get(number)
        hints.append({
            "section_number": number,
            "title": node.title,
            "content": node.content,
            "test_importance": summary.test_importance if summary else 0,
            "classification": summary.classification.value if summary else "descriptive",
        })
    return hints


def _parse_modules(
    answer: List[ModuleOut], tree: SpecTree, catalog: Dict[AgentKind, str]
) -> List[ProtocolModule]:
    known = {kind.value: kind for kind in catalog}
    modules: List[ProtocolModule] = []
    for item in answer:
        agent = known.get(item.assigned_agent.strip().lower())
        if agent is None:
            raise UnknownAgent(item.assigned_agent)
        sections = []
        for number in item.section_numbers:
            number = number.strip()
            if not tree.resolves(number):
                logger.warning(f"Module '{item.module_name}' names unknown section {number}; dropped")
            elif number not in sections:
                sections.append(number)
        if not sections:
            logger.warning(f"Module '{item.module_name}' has no resolvable sections; skipped")
            continue
        modules.append(ProtocolModule(item.module_name.strip(), item.description.strip(), agent, sections))
    return modules


def merge_modules(module_set: ModuleSet, supplement: List[ProtocolModule]) -> None:
    """Append new modules; union the section list of a module named again."""
    for module in supplement:
        try:
            existing = module_set.module(module.module_name)
        except KeyError:
            module_set.modules.append(module)
            continue
        for number in module.section_numbers:
            if number not in existing.section_numbers:
                existing.section_numbers.append(number)
        existing.section_numbers.sort(key=section_sort_key)


def form_modules(
    tree: SpecTree,
    summaries: Dict[str, SectionSummary],
    gateway: CompletionGateway,
    catalog: Optional[Dict[AgentKind, str]] = None,
) -> ModuleSet:
    """Initial module formation from the per-section key information."""
    catalog = catalog or AGENT_CATALOG
    numbers = tree.content_bearing_numbers()
    prompt = gateway.render(
        "module_formation",
        spec_title=tree.metadata.title,
        agent_catalog=agent_catalog_text(catalog),
        key_information=_key_information(numbers, summaries),
    )
    out = gateway.complete_structured(
        prompt,
        ModuleFormationOut,
        template_id="module_formation",
        hints={"sections": _section_hints(numbers, tree, summaries)},
    )
    module_set = ModuleSet()
    merge_modules(module_set, _parse_modules(out.modules, tree, catalog))
    logger.info(f"Formed {len(module_set.modules)} protocol modules")
    return module_set


def find_uncovered(
    tree: SpecTree,
    module_set: ModuleSet,
    summaries: Optional[Dict[str, SectionSummary]] = None,
    exempt_zero_importance_appendix: bool = True,
) -> List[str]:
    """Content-bearing sections no module covers, in document order."""
    covered = module_set.covered_sections()
    uncovered = []
    for number in tree.content_bearing_numbers():
        if number in covered:
            continue
        summary = (summaries or {}).get(number)
        if (
            exempt_zero_importance_appendix
            and summary is not None
            and summary.classification == Classification.APPENDIX
            and summary.test_importance == 0
        ):
            continue
        uncovered.append(number)
    return uncovered


def complete_modules(
    tree: SpecTree,
    summaries: Dict[str, SectionSummary],
    module_set: ModuleSet,
    gateway: CompletionGateway,
    max_iterations: int = 10,
    catalog: Optional[Dict[AgentKind, str]] = None,
    exempt_zero_importance_appendix: bool = True,
) -> ModuleSet:
    """Ask for supplements until every section is covered or the cap is hit."""
    catalog = catalog or AGENT_CATALOG
    uncovered = find_uncovered(tree, module_set, summaries, exempt_zero_importance_appendix)
    iteration = 0

    while uncovered and iteration < max_iterations:
        iteration += 1
        module_set.uncovered_history.append(len(uncovered))
        logger.debug(f"Module completion round {iteration}: {len(uncovered)} uncovered")
        current = "\n".join(
            f"- {m.module_name} ({m.assigned_agent.value}): {m.description} [sections {', '.join(m.section_numbers)}]"
            for m in module_set.modules
        )
        prompt = gateway.render(
            "module_completion",
            spec_title=tree.metadata.title,
            agent_catalog=agent_catalog_text(catalog),
            current_modules=current or "(none)",
            uncovered_information=_key_information(uncovered, summaries),
        )
        out = gateway.complete_structured(
            prompt,
            ModuleFormationOut,
            template_id="module_completion",
            hints={
                "sections": _section_hints(uncovered, tree, summaries),
                "modules": [m.to_dict() for m in module_set.modules],
            },
        )
        merge_modules(module_set, _parse_modules(out.modules, tree, catalog))
        uncovered = find_uncovered(tree, module_set, summaries, exempt_zero_importance_appendix)

    module_set.iteration_count = iteration
    module_set.uncovered_after = uncovered
    if uncovered:
        logger.warning(
            f"Module completion stopped after {iteration} iteration(s); still uncovered: {', '.join(uncovered)}"
        )
    else:
        logger.info(f"All sections covered after {iteration} completion iteration(s)")
    return module_set
