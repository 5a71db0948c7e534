"""Small loop escalation, large loop regeneration and manual review."""

import os

import pytest

from src.errors import PreconditionViolation
from src.models.loop import (
    AttemptRecord,
    Disposition,
    EscalationTicket,
    FaultReport,
    LoopPass,
    ManualReview,
    Resolved,
    SuspectedOrigin,
)
from src.models.settings import LoopConfig
from src.models.testbed import FaultCategory
from src.models.testcase import CaseKind, TestCase
from src.services.artifact_forge import ForgeContext
from src.services.feedback_loops import escalate, run_case, run_small_loop, suspected_origin
from src.services.knowledge_base import KnowledgeBase
from src.services.testbed_sim import load_fault_profile, testbed_devices
from src.services.testcase_engine import regenerate_case

ROUTE = "The DUT installs the route 192.0.2.0/24 in its routing table."
ALIVE = "The DUT remains operational."


def route_case():
    return TestCase(
        case_id="TC-0001",
        title="Advertised route is installed",
        objective="A Response from a neighbor installs its routes.",
        steps=[
            "Configure the DUT interface GigabitEthernet0/0 with 10.0.0.1/24 and enable rip.",
            "Start a rip peer on tester port 1 and begin capturing.",
            "Advertise route 192.0.2.0/24 from tester port 1.",
            "Send a Response message from tester port 1.",
            "Stop the capture and check the DUT response.",
        ],
        expected_results=[ROUTE, ALIVE],
        reference_sections=["4.2"],
        topology="Tester port 1 connected to DUT GigabitEthernet0/0",
    )


def alive_case():
    case = route_case()
    case.expected_results = [ALIVE]
    return case


@pytest.fixture
def make_ctx(tmp_path, offline_gateway, sample_dir):
    kb = KnowledgeBase.load(KnowledgeBase.init_default(str(tmp_path / "kb")), devices=testbed_devices())

    def make(profile=None, loop=None):
        path = os.path.join(sample_dir, "faults", f"{profile}.json") if profile else None
        return ForgeContext(
            kb=kb,
            gateway=offline_gateway,
            loop=loop or LoopConfig(max_rounds_per_attempt=2, max_attempts=1),
            profile=load_fault_profile(path),
        )

    return make


@pytest.fixture
def regenerate(offline_gateway, mini_tree):
    def make(case, origin, evidence, new_id):
        return regenerate_case(case, origin.value, evidence, offline_gateway, mini_tree, new_id)

    return make


def attempt(n, *categories):
    return AttemptRecord(n, 2, [FaultReport(c, f"evidence {c.value}") for c in categories])


def test_suspected_origin():
    assert suspected_origin([attempt(1, FaultCategory.UNSUPPORTED_COMMAND)]) == SuspectedOrigin.TESTER_LIMITATION
    mismatch = [attempt(1, FaultCategory.CONFIGURATION_MISMATCH), attempt(2, FaultCategory.CONFIGURATION_MISMATCH)]
    assert suspected_origin(mismatch) == SuspectedOrigin.DUT_DEFECT_OR_DOCS
    assert suspected_origin(mismatch[:1]) == SuspectedOrigin.TEST_CASE_FLAW
    assert suspected_origin([attempt(1, FaultCategory.ASSERTION_FAILURE)]) == SuspectedOrigin.TEST_CASE_FLAW
    with pytest.raises(PreconditionViolation):
        suspected_origin([])


def test_small_loop_pass(make_ctx):
    result = run_small_loop(route_case(), make_ctx())
    assert isinstance(result, LoopPass)
    assert (result.rounds, result.attempt, result.total_executions) == (1, 1, 1)
    assert "assert_route 192.0.2.0/24" in result.artifact.tester_script


def test_small_loop_escalates_with_history(make_ctx):
    ticket = run_small_loop(route_case(), make_ctx("route_missing"))
    assert isinstance(ticket, EscalationTicket)
    assert ticket.case_id == "TC-0001"
    assert ticket.suspected_origin == SuspectedOrigin.TEST_CASE_FLAW
    assert ticket.total_rounds == 2
    assert len(ticket.trace) == 2
    assert "prefix absent" in ticket.history[-1].faults[0].evidence


def test_default_bounds_escalate_after_thirty_rounds(make_ctx):
    ticket = run_small_loop(alive_case(), make_ctx("dut_unresponsive", loop=LoopConfig()))
    assert isinstance(ticket, EscalationTicket)
    assert [a.attempt for a in ticket.history] == [1, 2, 3]
    assert all(a.rounds == 10 for a in ticket.history)
    assert ticket.total_rounds == 30
    assert len(ticket.trace) == 30


def test_regenerated_case_resolves_the_ticket(make_ctx, regenerate):
    ctx = make_ctx("route_missing")
    case = route_case()
    ticket = run_small_loop(case, ctx)

    outcome = escalate(ticket, case, regenerate, lambda c: run_small_loop(c, ctx))

    assert isinstance(outcome, Resolved)
    new_case = outcome.new_cases[0]
    assert new_case.case_id == "TC-0001-R1"
    assert new_case.kind == CaseKind.REGENERATED
    assert new_case.expected_results == [ALIVE]
    assert new_case.reference_sections == ["4.2"]
    assert ticket.disposition == Disposition.REGENERATE_CASE
    assert ticket.regeneration_passes == 1


def test_manual_review_after_every_pass_fails(make_ctx, regenerate):
    ctx = make_ctx("dut_unresponsive")
    case = alive_case()
    ticket = run_small_loop(case, ctx)

    outcome = escalate(ticket, case, regenerate, lambda c: run_small_loop(c, ctx), passes=2)

    assert isinstance(outcome, ManualReview)
    assert [c.case_id for c in outcome.attempted_cases] == ["TC-0001-R1", "TC-0001-R2"]
    assert ticket.disposition == Disposition.MANUAL_REVIEW
    assert ticket.regeneration_passes == 2


def test_escalate_preconditions(regenerate):
    empty = EscalationTicket("TC-0001", SuspectedOrigin.TEST_CASE_FLAW)
    with pytest.raises(PreconditionViolation):
        escalate(empty, route_case(), regenerate, lambda c: None)

    ticket = EscalationTicket("TC-0001", SuspectedOrigin.TEST_CASE_FLAW, [attempt(1, FaultCategory.ENVIRONMENT)])
    with pytest.raises(PreconditionViolation):
        escalate(ticket, route_case(), regenerate, lambda c: None, passes=0)


def test_escalate_passes_latest_evidence_to_regeneration():
    seen = []
    ticket = EscalationTicket(
        "TC-0009", SuspectedOrigin.TESTER_LIMITATION, [attempt(1, FaultCategory.UNSUPPORTED_COMMAND)]
    )

    def regenerate(case, origin, evidence, new_id):
        seen.append((origin, evidence, new_id))
        return TestCase(new_id, "t", "o", ["s"], ["e"], [])

    def small_loop(case):
        return EscalationTicket(case.case_id, SuspectedOrigin.TEST_CASE_FLAW, [attempt(1, FaultCategory.ASSERTION_FAILURE)])

    escalate(ticket, TestCase("TC-0009", "t", "o", ["s"], ["e"], []), regenerate, small_loop, passes=2)

    assert seen == [
        (SuspectedOrigin.TESTER_LIMITATION, "evidence unsupported_command", "TC-0009-R1"),
        (SuspectedOrigin.TEST_CASE_FLAW, "evidence assertion_failure", "TC-0009-R2"),
    ]


@pytest.mark.parametrize(
    "profile, case, status",
    [
        (None, route_case, "pass"),
        ("route_missing", route_case, "resolved"),
        ("dut_unresponsive", alive_case, "manual_review"),
    ],
)
def test_run_case_outcomes(make_ctx, regenerate, profile, case, status):
    outcome = run_case(case(), make_ctx(profile), regenerate)
    assert outcome.status == status

    summary = outcome.summary()
    assert summary["status"] == status
    if status == "manual_review":
        assert outcome.final_pass is None
        assert summary["attempted_cases"] == ["TC-0001-R1"]
        assert summary["ticket"]["disposition"] == "manual_review"
    else:
        assert summary["executions"] >= 1
    if status == "resolved":
        assert summary["regenerated_case"] == "TC-0001-R1"
