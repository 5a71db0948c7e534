"""Test case generation, coverage verification and refinement."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from ..data import data_path
from ..errors import PreconditionViolation, SchemaViolation, UnknownClassification
from ..logging_config import get_logger
from ..models.analysis import ProtocolModule, SectionSummary
from ..models.protocol_models import TestingPoint
from ..models.settings import CoverageConfig
from ..models.spec_tree import SpecTree, section_sort_key
from ..models.testcase import BreadthReport, CaseKind, DepthEntry, DepthReport, KeySection, TestCase
from .llm_gateway import CompletionGateway
from .schemas import CaseOut, CasesOut, DepthOut

logger = get_logger("testcase_engine")

REFERENCE_DRIFT = "reference_drift"
NO_COVERAGE = "no coverage"


def case_id_for(n: int) -> str:
    return f"TC-{n:04d}"


def load_reference_cases(path: Optional[str] = None) -> List[dict]:
    """Few-shot reference cases shown to the generator."""
    path = path or data_path("reference_cases.json")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f).get("cases", [])


def examples_text(examples: Sequence[dict]) -> str:
    if not examples:
        return "(none)"
    return "\n\n".join(json.dumps(e, ensure_ascii=False, sort_keys=True) for e in examples)


# ---------------------------------------------------------------------------
# Importance and key sections
# ---------------------------------------------------------------------------


def compute_score(summary: SectionSummary, config: CoverageConfig) -> float:
    """score = test_importance x weight(classification)."""
    classification = summary.classification.value
    if classification not in config.weight_map:
        raise UnknownClassification(classification)
    return summary.test_importance * config.weight_map[classification]


def select_key_sections(summaries: Dict[str, SectionSummary], config: CoverageConfig) -> List[KeySection]:
    """Sections whose score reaches the threshold, in document order."""
    key = []
    for number in sorted(summaries, key=section_sort_key):
        score = compute_score(summaries[number], config)
        if score >= config.threshold:
            key.append(KeySection(number, score))
    return key


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass
class CaseContext:
    """What the generator knows besides the testing point itself."""

    tree: SpecTree
    summaries: Dict[str, SectionSummary]
    protocol_summary: str = ""
    modules: Dict[str, ProtocolModule] = field(default_factory=dict)

    def section_summaries(self, numbers: Sequence[str]) -> str:
        lines = [self.summaries[n].key_information() for n in numbers if n in self.summaries]
        return "\n".join(lines) or "(none)"


def _point_text(point: TestingPoint) -> str:
    lines = [
        f"Title: {point.title}",
        f"Objective: {point.objective}",
        f"Origin: {point.origin.value}",
        f"Reference sections: {', '.join(point.reference_sections)}",
    ]
    if point.parameters:
        lines.append(f"Parameters: {json.dumps(point.parameters, ensure_ascii=False, sort_keys=True)}")
    if point.additional_tools_required:
        lines.append(f"Tools: {', '.join(point.additional_tools_required)}")
    return "\n".join(lines)


def _case_from_answer(
    out: CaseOut,
    case_id: str,
    tree: SpecTree,
    required_sections: Sequence[str],
    kind: CaseKind,
) -> TestCase:
    references = []
    for number in out.reference_sections:
        number = number.strip()
        if not tree.resolves(number):
            logger.warning(f"{case_id}: dropped unknown reference section {number}")
        elif number not in references:
            references.append(number)
    flags = []
    missing = [n for n in required_sections if n not in references]
    if missing:
        flags.append(REFERENCE_DRIFT)
        logger.warning(f"{case_id}: answer dropped reference section(s) {', '.join(missing)}; restored")
        references.extend(missing)
    return TestCase(
        case_id=case_id,
        title=out.title.strip(),
        objective=out.objective.strip(),
        steps=[s.strip() for s in out.steps],
        expected_results=[r.strip() for r in out.expected_results],
        reference_sections=sorted(references, key=section_sort_key),
        topology=out.topology.strip(),
        parameters=dict(out.parameters),
        kind=kind,
        flags=flags,
    )


def generate_case(
    point: TestingPoint,
    context: CaseContext,
    examples: Sequence[dict],
    gateway: CompletionGateway,
    case_id: str = "",
) -> TestCase:
    """One test case for one testing point; keeps at least the point's sections."""
    if not point.objective.strip():
        raise PreconditionViolation(f"Testing point '{point.title}' has no objective")
    if not point.reference_sections:
        raise PreconditionViolation(f"Testing point '{point.title}' has no reference sections")

    module = context.modules.get(point.module_name)
    prompt = gateway.render(
        "testcase_generation",
        protocol_summary=context.protocol_summary,
        module_name=point.module_name or "(none)",
        module_description=module.description if module else "",
        section_summaries=context.section_summaries(point.reference_sections),
        examples=examples_text(examples),
        point=_point_text(point),
    )
    try:
        out = gateway.complete_structured(
            prompt, CaseOut, template_id="testcase_generation", hints={"point": point.to_dict()}
        )
    except SchemaViolation as e:
        raise e.with_section(point.reference_sections[0]) from e

    case = _case_from_answer(out, case_id, context.tree, point.reference_sections, CaseKind.INITIAL)
    case.origin = point.origin.value
    case.module_name = point.module_name
    case.point_id = point.point_id
    return case


def generate_cases(
    points: Sequence[TestingPoint],
    context: CaseContext,
    examples: Sequence[dict],
    gateway: CompletionGateway,
    workers: int = 4,
) -> List[TestCase]:
    """Generate one case per point (bounded parallel); ids follow point order."""

    def run(item):
        index, point = item
        return generate_case(point, context, examples, gateway, case_id_for(index))

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        cases = list(pool.map(run, enumerate(points, 1)))
    logger.info(f"Generated {len(cases)} test cases from {len(points)} testing points")
    return cases


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def compute_breadth(cases: Sequence[TestCase], key_sections: Sequence[KeySection]) -> BreadthReport:
    """A key section is covered when at least one case lists it as a reference."""
    referenced = set()
    for case in cases:
        referenced.update(case.reference_sections)
    covered = [k.section_number for k in key_sections if k.section_number in referenced]
    report = BreadthReport(key_sections=list(key_sections), covered=covered)
    if key_sections:
        report.coverage_rate = len(covered) / len(key_sections)
    else:
        report.flags.append("empty_key_set")
        logger.warning("No key sections selected; breadth coverage reported as 0")
    return report


def group_by_section(cases: Sequence[TestCase]) -> Dict[str, List[TestCase]]:
    """Cases per referenced section; a case counts fully in every section it lists."""
    groups: Dict[str, List[TestCase]] = {}
    for case in cases:
        for number in case.reference_sections:
            groups.setdefault(number, []).append(case)
    return groups


def judge_depth(
    section_number: str,
    context: CaseContext,
    cases_for_section: Sequence[TestCase],
    gateway: CompletionGateway,
) -> DepthEntry:
    if not cases_for_section:
        return DepthEntry(
            section_number=section_number,
            basic_function_score=0,
            boundary_case_score=0,
            rationale="No test case references this section.",
            suggestions=[NO_COVERAGE],
        )
    node = context.tree.node(section_number)
    summary = context.summaries.get(section_number)
    prompt = gateway.render(
        "depth_judge",
        section_number=section_number,
        section_title=node.title,
        section_summary=summary.summary if summary else "",
        cases="\n\n".join(c.prompt_text() for c in cases_for_section),
    )
    try:
        out = gateway.complete_structured(
            prompt,
            DepthOut,
            template_id="depth_judge",
            hints={
                "section_number": section_number,
                "title": node.title,
                "cases": [c.to_dict() for c in cases_for_section],
            },
        )
    except SchemaViolation as e:
        raise e.with_section(section_number) from e
    return DepthEntry(
        section_number=section_number,
        basic_function_score=out.basic_function_score,
        boundary_case_score=out.boundary_case_score,
        rationale=out.rationale,
        suggestions=list(out.suggestions),
        case_count=len(cases_for_section),
    )


def judge_all(
    key_sections: Sequence[KeySection],
    cases: Sequence[TestCase],
    context: CaseContext,
    gateway: CompletionGateway,
) -> DepthReport:
    groups = group_by_section(cases)
    report = DepthReport()
    for key in key_sections:
        report.entries.append(judge_depth(key.section_number, context, groups.get(key.section_number, []), gateway))
    logger.info(
        f"Depth over {len(report.entries)} key sections: basic {report.mean_basic:.1f}, "
        f"boundary {report.mean_boundary:.1f}"
    )
    return report


def below_targets(entry: DepthEntry, config: CoverageConfig) -> bool:
    return entry.basic_function_score < config.basic_target or entry.boundary_case_score < config.boundary_target


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------


@dataclass
class RefinementOutcome:
    new_cases: List[TestCase]
    rounds: int
    breadth: BreadthReport
    depth: DepthReport


def _supplement(
    template_id: str,
    section_number: str,
    context: CaseContext,
    gateway: CompletionGateway,
    extra: Dict[str, str],
    hints: dict,
) -> List[CaseOut]:
    node = context.tree.node(section_number)
    summary = context.summaries.get(section_number)
    prompt = gateway.render(
        template_id,
        protocol_summary=context.protocol_summary,
        section_number=section_number,
        section_title=node.title,
        section_summary=summary.summary if summary else "",
        **extra,
    )
    hints = {"section_number": section_number, "title": node.title, "content": node.content, **hints}
    try:
        out = gateway.complete_structured(prompt, CasesOut, template_id=template_id, hints=hints)
    except SchemaViolation as e:
        raise e.with_section(section_number) from e
    return out.test_cases


def refine(
    breadth: BreadthReport,
    depth: DepthReport,
    gateway: CompletionGateway,
    context: CaseContext,
    cases: Sequence[TestCase],
    config: CoverageConfig,
    examples: Sequence[dict] = (),
) -> RefinementOutcome:
    """Supplement uncovered key sections first, then weak ones, for a bounded number of rounds."""
    all_cases = list(cases)
    next_id = len(all_cases) + 1
    outcome = RefinementOutcome(new_cases=[], rounds=0, breadth=breadth, depth=depth)

    while outcome.rounds < config.max_refinement_rounds:
        uncovered = outcome.breadth.uncovered
        weak = [
            e for e in outcome.depth.entries
            if below_targets(e, config) and e.section_number not in uncovered
        ]
        if not uncovered and not weak:
            break
        outcome.rounds += 1
        round_cases: List[TestCase] = []
        logger.info(
            f"Refinement round {outcome.rounds}: {len(uncovered)} uncovered, {len(weak)} below depth targets"
        )

        for number in uncovered:
            answers = _supplement(
                "breadth_supplement",
                number,
                context,
                gateway,
                {"section_content": context.tree.node(number).content, "examples": examples_text(examples)},
                {},
            )
            for out in answers:
                round_cases.append(
                    _case_from_answer(out, case_id_for(next_id), context.tree, [number], CaseKind.BREADTH_SUPPLEMENT)
                )
                next_id += 1

        groups = group_by_section(all_cases)
        for entry in weak:
            existing = groups.get(entry.section_number, [])
            answers = _supplement(
                "depth_supplement",
                entry.section_number,
                context,
                gateway,
                {
                    "existing_cases": "\n\n".join(c.prompt_text() for c in existing) or "(none)",
                    "suggestions": "\n".join(f"- {s}" for s in entry.suggestions) or "(none)",
                },
                {
                    "suggestions": list(entry.suggestions),
                    "basic_function_score": entry.basic_function_score,
                    "boundary_case_score": entry.boundary_case_score,
                },
            )
            for out in answers:
                round_cases.append(
                    _case_from_answer(
                        out, case_id_for(next_id), context.tree, [entry.section_number], CaseKind.DEPTH_SUPPLEMENT
                    )
                )
                next_id += 1

        for case in round_cases:
            case.refinement_round = outcome.rounds
        outcome.new_cases.extend(round_cases)
        all_cases.extend(round_cases)
        outcome.breadth = compute_breadth(all_cases, outcome.breadth.key_sections)
        outcome.depth = judge_all(outcome.breadth.key_sections, all_cases, context, gateway)

    logger.info(f"Refinement added {len(outcome.new_cases)} case(s) in {outcome.rounds} round(s)")
    return outcome


# ---------------------------------------------------------------------------
# Large-loop regeneration and external suites
# ---------------------------------------------------------------------------


def regenerate_case(
    case: TestCase,
    suspected_origin: str,
    evidence: str,
    gateway: CompletionGateway,
    tree: SpecTree,
    new_id: str,
) -> TestCase:
    """Alternative version of a case whose executable test kept failing."""
    prompt = gateway.render(
        "case_regeneration",
        suspected_origin=suspected_origin,
        case=case.prompt_text(),
        evidence=evidence,
    )
    out = gateway.complete_structured(
        prompt,
        CaseOut,
        template_id="case_regeneration",
        hints={"case": case.to_dict(), "evidence": evidence, "suspected_origin": suspected_origin},
    )
    regenerated = _case_from_answer(out, new_id, tree, case.reference_sections, CaseKind.REGENERATED)
    regenerated.origin = case.origin
    regenerated.module_name = case.module_name
    regenerated.point_id = case.point_id
    return regenerated


def score_suite(
    cases: Sequence[TestCase],
    key_sections: Sequence[KeySection],
    context: CaseContext,
    gateway: CompletionGateway,
):
    """Breadth and depth of an externally supplied suite against the same key sections."""
    known = [c for c in cases if all(context.tree.resolves(n) for n in c.reference_sections)]
    if len(known) != len(cases):
        logger.warning(f"{len(cases) - len(known)} external case(s) reference unknown sections; ignored")
    return compute_breadth(known, key_sections), judge_all(key_sections, known, context, gateway)
