"""Small loop (artifact refinement) and large loop (case regeneration, manual review)."""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

from ..errors import AttemptsExhausted, PreconditionViolation
from ..logging_config import get_logger
from ..models.artifact import FineGrainedIntent
from ..models.loop import (
    AttemptRecord,
    Disposition,
    EscalationTicket,
    LoopPass,
    ManualReview,
    Resolved,
    SuspectedOrigin,
)
from ..models.testbed import FaultCategory
from ..models.testcase import TestCase
from .artifact_forge import ForgeContext, generate, orchestrate, update_subagents
from .fault_classifier import classify

logger = get_logger("feedback_loops")

# Re-exported: classification is the first step of every failed round
__all__ = ["classify", "suspected_origin", "run_small_loop", "escalate", "CaseOutcome", "run_case"]

SmallLoopResult = Union[LoopPass, EscalationTicket]


def suspected_origin(history: List[AttemptRecord]) -> SuspectedOrigin:
    """Guess why a case could not be automated.

    Unsupported tester calls point at the tester; a configuration the DUT keeps
    refusing across attempts points at the DUT or its documentation; an
    assertion that fails on a clean deployment, or anything else, points at
    the case itself.
    """
    if not history:
        raise PreconditionViolation("suspected_origin needs at least one attempt")
    last = {f.category for f in history[-1].faults}
    if FaultCategory.UNSUPPORTED_COMMAND in last:
        return SuspectedOrigin.TESTER_LIMITATION
    mismatch_attempts = sum(
        1 for a in history if any(f.category == FaultCategory.CONFIGURATION_MISMATCH for f in a.faults)
    )
    if mismatch_attempts >= 2:
        return SuspectedOrigin.DUT_DEFECT_OR_DOCS
    return SuspectedOrigin.TEST_CASE_FLAW


def _intents_for(case: TestCase, ctx: ForgeContext) -> Tuple[FineGrainedIntent, List[str]]:
    if not ctx.options.use_orchestrator:
        return FineGrainedIntent(script_intents=[case.prompt_text()]), []
    few_shots = ctx.kb.few_shots.select(case.prompt_text(), ctx.options.few_shot_count)
    return orchestrate(case, few_shots, ctx.gateway), [e.case_id for e in few_shots]


def run_small_loop(case: TestCase, ctx: ForgeContext) -> SmallLoopResult:
    """Generate, deploy, classify and correct until pass or escalation.

    Bounded by max_rounds_per_attempt x max_attempts testbed executions.
    """
    intents, few_shot_ids = _intents_for(case, ctx)
    try:
        result = generate(case, intents, ctx)
    except AttemptsExhausted as e:
        update_subagents(case, intents, few_shot_ids, None, ctx.kb, ctx.options, ctx.run_id)
        ticket = EscalationTicket(
            case_id=case.case_id,
            suspected_origin=suspected_origin(e.history),
            history=list(e.history),
            trace=list(e.trace),
        )
        logger.warning(
            f"{case.case_id}: escalated after {len(e.history)} attempt(s), "
            f"suspected {ticket.suspected_origin.value}"
        )
        return ticket

    update_subagents(case, intents, few_shot_ids, result, ctx.kb, ctx.options, ctx.run_id)
    return LoopPass(result.artifact, result.rounds, result.attempt, result.trace)


def _evidence(ticket: EscalationTicket) -> str:
    lines = []
    for fault in ticket.history[-1].faults:
        if fault.evidence not in lines:
            lines.append(fault.evidence)
    return "\n".join(lines) or "(no fault evidence)"


def escalate(
    ticket: EscalationTicket,
    case: TestCase,
    regenerate: Callable[[TestCase, SuspectedOrigin, str, str], TestCase],
    small_loop: Callable[[TestCase], SmallLoopResult],
    passes: int = 1,
) -> Union[Resolved, ManualReview]:
    """Route a failed case back to case generation before any manual review.

    ``regenerate(case, origin, evidence, new_id)`` produces the alternative case;
    ``small_loop`` runs it. Every pass regenerates from the latest case and its
    newest failure evidence.
    """
    if not ticket.history:
        raise PreconditionViolation(f"Escalation ticket for {ticket.case_id} has no history")
    if passes < 1:
        raise PreconditionViolation("at least one regeneration pass is required")

    attempted: List[TestCase] = []
    current_case, current_ticket = case, ticket
    for n in range(1, passes + 1):
        new_case = regenerate(
            current_case, current_ticket.suspected_origin, _evidence(current_ticket), f"{ticket.case_id}-R{n}"
        )
        attempted.append(new_case)
        ticket.regeneration_passes = n
        outcome = small_loop(new_case)
        if isinstance(outcome, LoopPass):
            ticket.disposition = Disposition.REGENERATE_CASE
            logger.info(f"{ticket.case_id}: resolved by regenerated case {new_case.case_id}")
            return Resolved(ticket, [new_case], [outcome])
        current_case, current_ticket = new_case, outcome

    ticket.disposition = Disposition.MANUAL_REVIEW
    logger.warning(f"{ticket.case_id}: flagged for manual review after {passes} regeneration pass(es)")
    return ManualReview(ticket, attempted)


@dataclass
class CaseOutcome:
    """Everything the loop stage writes for one original case."""

    case: TestCase
    small: SmallLoopResult
    large: Optional[Union[Resolved, ManualReview]] = None

    @property
    def final_pass(self) -> Optional[LoopPass]:
        if isinstance(self.small, LoopPass):
            return self.small
        if isinstance(self.large, Resolved):
            return self.large.passes[0]
        return None

    @property
    def status(self) -> str:
        if isinstance(self.small, LoopPass):
            return "pass"
        if isinstance(self.large, Resolved):
            return "resolved"
        return "manual_review"

    def summary(self) -> Dict[str, object]:
        d: Dict[str, object] = {"case_id": self.case.case_id, "status": self.status}
        final = self.final_pass
        if final is not None:
            d.update({"rounds": final.rounds, "attempt": final.attempt, "executions": final.total_executions})
        if isinstance(self.small, EscalationTicket):
            d["ticket"] = self.small.to_dict()
        if isinstance(self.large, Resolved):
            d["regenerated_case"] = self.large.new_cases[0].case_id
        elif isinstance(self.large, ManualReview):
            d["attempted_cases"] = [c.case_id for c in self.large.attempted_cases]
        return d


def run_case(
    case: TestCase,
    ctx: ForgeContext,
    regenerate: Callable[[TestCase, SuspectedOrigin, str, str], TestCase],
    passes: int = 1,
) -> CaseOutcome:
    """Small loop, then the large loop if the small one escalates."""
    small = run_small_loop(case, ctx)
    if isinstance(small, LoopPass):
        return CaseOutcome(case, small)
    large = escalate(small, case, regenerate, lambda c: run_small_loop(c, ctx), passes)
    return CaseOutcome(case, small, large)
