"""Stage 4: turn test cases into executable artifacts.

The core agent drafts a tester script and a DUT configuration from the case's
fine-grained intents and the retrieved documentation, deploys them on the
testbed, and redrafts with the fault corrector's suggestions until the case
passes or the round/attempt budget is spent. Three sub-agents keep the
knowledge base current: the fault corrector (experience pool), the summarizer
(index summaries) and the orchestrator (few-shot examples).
"""

import difflib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import AttemptsExhausted, PreconditionViolation, SchemaViolation
from ..logging_config import get_logger
from ..models.artifact import ExecutableArtifact, ExperienceEntry, FewShotExample, FineGrainedIntent, RetrievalHit
from ..models.loop import AttemptRecord, FaultReport, RoundRecord
from ..models.settings import ForgeOptions, LoopConfig
from ..models.testbed import (
    EventKind,
    ExecutionEvent,
    ExecutionLog,
    FaultCategory,
    FaultProfile,
    TesterApiRegistry,
)
from ..models.testcase import TestCase
from .fault_classifier import FaultRules, classify, default_fault_rules
from .knowledge_base import KnowledgeBase, retrieve
from .line_normalizer import CONFIG, SCRIPT, normalize_lines, parse_call
from .llm_gateway import CompletionGateway
from .schemas import ArtifactOut, IntentOut
from .testbed_sim import CliGrammar, TestbedSession, load_behaviour, load_registry

logger = get_logger("artifact_forge")

NO_ASSERTION = "no assertion covers the expected results"

__all__ = [
    "ForgeContext",
    "Correction",
    "GenerationResult",
    "orchestrate",
    "retrieve",
    "correct",
    "generate",
    "update_subagents",
]


@dataclass
class ForgeContext:
    """Everything the core agent needs for one stage run; shared by all cases."""

    kb: KnowledgeBase
    gateway: CompletionGateway
    options: ForgeOptions = field(default_factory=ForgeOptions)
    loop: LoopConfig = field(default_factory=LoopConfig)
    profile: FaultProfile = field(default_factory=FaultProfile)
    grammar: Optional[CliGrammar] = None
    registry: Optional[TesterApiRegistry] = None
    behaviour: Optional[Dict[str, dict]] = None
    fault_rules: Optional[FaultRules] = None
    run_id: str = ""

    def __post_init__(self):
        self.grammar = self.grammar or CliGrammar.load()
        self.registry = self.registry or load_registry()
        self.behaviour = self.behaviour if self.behaviour is not None else load_behaviour()
        self.fault_rules = self.fault_rules or default_fault_rules()

    def session(self) -> TestbedSession:
        return TestbedSession(self.profile, self.grammar, self.registry, self.behaviour)

    def api_reference(self) -> str:
        lines = []
        for name in self.registry.names():
            entry = self.registry.get(name)
            params = " ".join(f"<{p}>" for p in entry.parameters)
            lines.append(f"{name} {params}".rstrip() + f": {entry.effect}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Orchestrator
# ---------------------------------------------------------------------------


def _few_shot_text(few_shots: List[FewShotExample]) -> str:
    if not few_shots:
        return "(none)"
    return "\n\n".join(f"{e.case_text}\n{e.intents.prompt_text()}" for e in few_shots)


def orchestrate(case: TestCase, few_shots: List[FewShotExample], gateway: CompletionGateway) -> FineGrainedIntent:
    """Split a case into script, config and topology intents."""
    if not case.steps:
        raise PreconditionViolation(f"Case {case.case_id} has no steps")
    prompt = gateway.render("orchestrator", few_shots=_few_shot_text(few_shots), case=case.prompt_text())
    out = gateway.complete_structured(
        prompt, IntentOut, template_id="orchestrator", hints={"case": case.to_dict()}
    )
    return FineGrainedIntent(
        script_intents=[s.strip() for s in out.script_intents if s.strip()],
        config_intents=[s.strip() for s in out.config_intents if s.strip()],
        topology_intents=[s.strip() for s in out.topology_intents if s.strip()],
    )


# ---------------------------------------------------------------------------
# Fault corrector
# ---------------------------------------------------------------------------


@dataclass
class Correction:
    fix_text: str
    entry: Optional[ExperienceEntry] = None


def correct(
    fault: FaultReport,
    pool,
    cutoff: float = 0.8,
    rules: Optional[FaultRules] = None,
) -> Correction:
    """Fix suggestion for one fault: a remembered resolution if one matches, else the category's generic fix."""
    entry = pool.lookup(fault.evidence, cutoff) if pool is not None else None
    if entry is not None:
        return Correction(entry.resolution, entry)
    rules = rules or default_fault_rules()
    return Correction(rules.generic_fix(fault.category))


# ---------------------------------------------------------------------------
# Core agent
# ---------------------------------------------------------------------------


@dataclass
class ResolvedFault:
    """A fault seen before the passing round, in any attempt, with the fix that removed it."""

    fault: FaultReport
    resolution: str


@dataclass
class GenerationResult:
    artifact: ExecutableArtifact
    rounds: int
    attempt: int
    trace: List[RoundRecord] = field(default_factory=list)
    resolved: List[ResolvedFault] = field(default_factory=list)
    retrieved: List[RetrievalHit] = field(default_factory=list)

    @property
    def first_draft(self) -> bool:
        return self.rounds == 1 and self.attempt == 1


def _knowledge(intents: FineGrainedIntent, ctx: ForgeContext) -> List[RetrievalHit]:
    if not ctx.options.use_summarizer:
        return []
    hits: Dict[str, RetrievalHit] = {}
    for intent in intents.script_intents + intents.config_intents:
        for hit in ctx.kb.retrieve(intent, ctx.options.retrieval_k):
            hits.setdefault(hit.entry_id, hit)
    return sorted(hits.values(), key=lambda h: h.entry_id)


def _knowledge_text(hits: List[RetrievalHit]) -> str:
    if not hits:
        return "(none)"
    return "\n\n".join(f"[{' > '.join(h.path)}]\n{h.payload.strip()}" for h in hits)


def _base_hints(case: TestCase, intents: FineGrainedIntent, hits: List[RetrievalHit], ctx: ForgeContext) -> dict:
    return {
        "case": case.to_dict(),
        "intents": intents.to_dict(),
        "apis": ctx.registry.names(),
        "behaviour": ctx.behaviour,
        "knowledge": [h.payload for h in hits],
    }


def _draft(
    case: TestCase, intents: FineGrainedIntent, hits: List[RetrievalHit], ctx: ForgeContext
) -> ArtifactOut:
    task = ctx.kb.task
    prompt = ctx.gateway.render(
        "artifact_draft",
        task_description=task.task_info.task_description,
        repository_structure="\n".join(task.task_info.repository_structure),
        device_inventory=", ".join(task.task_info.device_inventory),
        heuristics="\n".join(f"- {h}" for h in task.expert_heuristics),
        sops="\n".join(f"{i}. {s}" for i, s in enumerate(task.sops, 1)),
        api_reference=ctx.api_reference(),
        knowledge=_knowledge_text(hits),
        intents=intents.prompt_text(),
    )
    return ctx.gateway.complete_structured(
        prompt, ArtifactOut, template_id="artifact_draft", hints=_base_hints(case, intents, hits, ctx)
    )


def _redraft(
    case: TestCase,
    intents: FineGrainedIntent,
    hits: List[RetrievalHit],
    previous: ExecutableArtifact,
    faults: List[Tuple[FaultReport, Optional[ExecutionEvent]]],
    fixes: List[str],
    ctx: ForgeContext,
) -> ArtifactOut:
    if ctx.options.use_fault_corrector:
        fault_text = "\n".join(f"- {f.category.value}: {f.evidence}" for f, _ in faults)
    else:
        fault_text = "\n".join(f.evidence for f, _ in faults)
    prompt = ctx.gateway.render(
        "artifact_redraft",
        task_description=ctx.kb.task.task_info.task_description,
        api_reference=ctx.api_reference(),
        knowledge=_knowledge_text(hits),
        intents=intents.prompt_text(),
        previous_script="\n".join(previous.tester_script),
        previous_config="\n".join(previous.dut_config),
        faults=fault_text,
        fixes="\n".join(f"- {fix}" for fix in fixes) or "(none)",
    )
    hints = _base_hints(case, intents, hits, ctx)
    hints.update({
        "script": list(previous.tester_script),
        "config": list(previous.dut_config),
        "faults": [
            {
                "category": f.category.value,
                "kind": event.kind.value if event else "",
                "line_or_call": event.line_or_call if event else "",
                "detail": event.detail if event else f.evidence,
                "line_number": event.line_number if event else None,
            }
            for f, event in faults
        ],
        "fixes": list(fixes),
        "grammar_heads": ctx.grammar.heads(),
    })
    return ctx.gateway.complete_structured(prompt, ArtifactOut, template_id="artifact_redraft", hints=hints)


def _execute(artifact: ExecutableArtifact, ctx: ForgeContext) -> ExecutionLog:
    log = ctx.session().deploy(artifact.config_text, artifact.script_text)
    if not any(e.kind in (EventKind.ASSERTION_PASS, EventKind.ASSERTION_FAIL) for e in log.events):
        log.events.append(ExecutionEvent(EventKind.ASSERTION_FAIL, "(end of script)", NO_ASSERTION))
    return log


def _resolution(event: Optional[ExecutionEvent], artifact: ExecutableArtifact) -> str:
    """Describe how the final artifact differs at the line that failed."""
    if event is None or not event.line_or_call or event.line_or_call.startswith("("):
        return "redraft the artifact"
    kind = CONFIG if event.kind in (EventKind.CONFIG_ACCEPT, EventKind.CONFIG_REJECT) else SCRIPT
    source = artifact.dut_config if kind == CONFIG else artifact.tester_script
    final_units = normalize_lines(source, kind)
    failing = event.line_or_call
    if failing in final_units:
        return "redraft the artifact"
    close = difflib.get_close_matches(failing, final_units, n=1, cutoff=0.6)
    if close:
        return f"replace '{failing}' with '{close[0]}'"
    return f"remove line '{failing}'"


def generate(
    case: TestCase,
    intents: FineGrainedIntent,
    ctx: ForgeContext,
) -> GenerationResult:
    """Draft, deploy and redraft until the case passes.

    Each attempt starts from a fresh draft (conversation context cleared); the
    experience pool carries over. Raises AttemptsExhausted with the per-attempt
    history once every attempt used all its rounds.
    """
    hits = _knowledge(intents, ctx)
    cutoff = ctx.options.similarity_cutoff
    pool = ctx.kb.pool if ctx.options.use_fault_corrector else None
    trace: List[RoundRecord] = []
    history: List[AttemptRecord] = []
    # Distinct faults over every attempt so far
    seen: List[Tuple[FaultReport, Optional[ExecutionEvent]]] = []

    for attempt in range(1, ctx.loop.max_attempts + 1):
        artifact: Optional[ExecutableArtifact] = None
        faults: List[Tuple[FaultReport, Optional[ExecutionEvent]]] = []
        fixes: List[str] = []

        for round_no in range(1, ctx.loop.max_rounds_per_attempt + 1):
            try:
                if artifact is None:
                    out = _draft(case, intents, hits, ctx)
                else:
                    out = _redraft(case, intents, hits, artifact, faults, fixes, ctx)
            except SchemaViolation as e:
                # The artifact never reached the testbed; the round still counts
                report = FaultReport(FaultCategory.SYNTAX_ERROR, f"artifact schema violation: {e.detail}")
                faults, fixes = [(report, None)], [ctx.fault_rules.generic_fix(FaultCategory.SYNTAX_ERROR)]
                trace.append(RoundRecord(attempt, round_no, False, [report], fixes))
                continue

            artifact = ExecutableArtifact(case.case_id, list(out.tester_script), list(out.dut_config))
            log = _execute(artifact, ctx)

            if log.is_clean:
                trace.append(RoundRecord(attempt, round_no, True))
                logger.info(f"{case.case_id}: pass in attempt {attempt}, round {round_no}")
                resolved = [ResolvedFault(f, _resolution(ev, artifact)) for f, ev in seen]
                return GenerationResult(artifact, round_no, attempt, trace, resolved, hits)

            reports = classify(log, ctx.fault_rules)
            faults = [(r, log.events[r.source_events[0]]) for r in reports]
            seen.extend(f for f in faults if all(f[0].evidence != s[0].evidence for s in seen))
            if ctx.options.use_fault_corrector:
                fixes = []
                for report, _ in faults:
                    fix = correct(report, pool, cutoff, ctx.fault_rules).fix_text
                    if fix not in fixes:
                        fixes.append(fix)
            else:
                fixes = []
            clean_deploy = all(r.category == FaultCategory.ASSERTION_FAILURE for r in reports)
            trace.append(RoundRecord(attempt, round_no, clean_deploy, reports, list(fixes)))
            logger.debug(
                f"{case.case_id}: attempt {attempt} round {round_no} failed with "
                f"{', '.join(r.category.value for r in reports)}"
            )

        history.append(AttemptRecord(attempt, ctx.loop.max_rounds_per_attempt, [f for f, _ in faults]))
        logger.info(f"{case.case_id}: attempt {attempt} exhausted {ctx.loop.max_rounds_per_attempt} rounds")

    raise AttemptsExhausted(case.case_id, ctx.loop.max_attempts, ctx.loop.max_rounds_per_attempt, history, trace)


# ---------------------------------------------------------------------------
# Sub-agent updates
# ---------------------------------------------------------------------------


def _used_apis(artifact: ExecutableArtifact) -> List[str]:
    names = []
    for line in artifact.tester_script:
        parsed = parse_call(line)
        if parsed and parsed[0] not in names:
            names.append(parsed[0])
    return names


def update_subagents(
    case: TestCase,
    intents: FineGrainedIntent,
    few_shot_ids: List[str],
    result: Optional[GenerationResult],
    kb: KnowledgeBase,
    options: ForgeOptions,
    run_id: str = "",
) -> Dict[str, int]:
    """Feed one case's outcome back into the knowledge base; returns change counts.

    * fault corrector: faults fixed by a later round or a fresh attempt are remembered
    * summarizer: APIs the artifact needed but retrieval did not surface are
      added to the summary of the leaf that documents them
    * orchestrator: few-shot statistics; a first-draft pass becomes a candidate example
    """
    changes = {"pool": 0, "index": 0, "few_shots": 0}
    passed = result is not None
    kb.few_shots.note_use(few_shot_ids, passed)
    if result is None:
        return changes

    if options.use_fault_corrector:
        for item in result.resolved:
            if kb.pool.record(item.fault.evidence, item.fault.category, item.resolution, run_id):
                changes["pool"] += 1

    if options.use_summarizer:
        retrieved_text = "\n".join(h.payload for h in result.retrieved)
        for api in _used_apis(result.artifact):
            if api in retrieved_text:
                continue
            for entry_id, payload in kb.all_payloads():
                if api in payload:
                    if kb.refresh_summary(entry_id, [api]):
                        changes["index"] += 1
                    break

    if options.use_orchestrator and result.first_draft:
        if kb.few_shots.offer(case.case_id, case.prompt_text(), intents):
            changes["few_shots"] += 1

    if any(changes.values()):
        logger.debug(f"{case.case_id}: knowledge base updates {changes}")
    return changes
