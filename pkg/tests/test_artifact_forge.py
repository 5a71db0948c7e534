"""Core agent draft/deploy/redraft rounds, fault correction and knowledge base feedback."""

import json
import os

import pytest

from src.errors import AttemptsExhausted, PreconditionViolation
from src.models.artifact import FineGrainedIntent
from src.models.loop import FaultReport
from src.models.settings import ForgeOptions, LoopConfig
from src.models.testbed import FaultCategory
from src.models.testcase import TestCase
from src.services.artifact_forge import ForgeContext, correct, generate, orchestrate, update_subagents
from src.services.knowledge_base import ExperiencePool, KnowledgeBase
from src.services.testbed_sim import load_fault_profile, testbed_devices

STEPS = [
    "Configure the DUT interface GigabitEthernet0/0 with 10.0.0.1/24 and enable rip.",
    "Start a rip peer on tester port 1 and begin capturing.",
    "Send a Request message from tester port 1.",
    "Stop the capture and check the DUT response.",
]


def request_case(case_id="TC-0001", expected=None):
    return TestCase(
        case_id=case_id,
        title="Request answered with Response",
        objective="The DUT answers a Request with a Response.",
        steps=list(STEPS),
        expected_results=expected or ["The DUT sends a Response message to tester port 1."],
        reference_sections=["4.1"],
        topology="Tester port 1 connected to DUT GigabitEthernet0/0",
    )


@pytest.fixture
def kb(tmp_path):
    return KnowledgeBase.load(KnowledgeBase.init_default(str(tmp_path / "kb")), devices=testbed_devices())


@pytest.fixture
def make_ctx(kb, offline_gateway, sample_dir):
    def make(profile=None, loop=None, **options):
        path = os.path.join(sample_dir, "faults", f"{profile}.json") if profile else None
        return ForgeContext(
            kb=kb,
            gateway=offline_gateway,
            options=ForgeOptions(**options),
            loop=loop or LoopConfig(),
            profile=load_fault_profile(path),
            run_id="test",
        )

    return make


def test_orchestrator_splits_config_from_script(offline_gateway):
    intents = orchestrate(request_case(), [], offline_gateway)
    assert intents.config_intents == [
        "Configure interface GigabitEthernet0/0 with 10.0.0.1/24 and bring it up",
        "Enable rip on the network of GigabitEthernet0/0",
    ]
    assert "Send a Request message from tester port 1" in intents.script_intents
    assert intents.topology_intents == ["Tester port 1 connected to DUT GigabitEthernet0/0"]


def test_orchestrator_needs_steps(offline_gateway):
    case = request_case()
    case.steps = []
    with pytest.raises(PreconditionViolation):
        orchestrate(case, [], offline_gateway)


def test_first_draft_passes_on_a_clean_testbed(make_ctx):
    ctx = make_ctx()
    case = request_case()
    result = generate(case, orchestrate(case, [], ctx.gateway), ctx)

    assert result.first_draft
    assert (result.rounds, result.attempt) == (1, 1)
    assert result.resolved == []
    assert "send_message 1 Request" in result.artifact.tester_script
    assert result.artifact.tester_script[-1] == "assert_received 1 Response"
    assert " description link to tester port 1" in result.artifact.dut_config


def test_rejected_config_line_is_removed_in_the_next_round(make_ctx):
    ctx = make_ctx("description_rejected")
    case = request_case()
    result = generate(case, orchestrate(case, [], ctx.gateway), ctx)

    assert (result.rounds, result.attempt) == (2, 1)
    assert not any("description" in line for line in result.artifact.dut_config)
    first = result.trace[0]
    assert not first.deployment_clean
    assert [f.category for f in first.faults] == [FaultCategory.CONFIGURATION_MISMATCH]
    assert [r.resolution for r in result.resolved] == ["remove line 'description link to tester port 1'"]
    assert result.trace[1].deployment_clean


def test_unfixable_assertion_exhausts_every_attempt(make_ctx):
    ctx = make_ctx("dut_unresponsive", loop=LoopConfig(max_rounds_per_attempt=2, max_attempts=2))
    case = request_case(expected=["The DUT remains operational."])

    with pytest.raises(AttemptsExhausted) as info:
        generate(case, FineGrainedIntent(script_intents=[case.prompt_text()]), ctx)

    e = info.value
    assert (e.case_id, e.attempts, e.rounds) == ("TC-0001", 2, 2)
    assert [a.attempt for a in e.history] == [1, 2]
    assert len(e.trace) == ctx.loop.execution_bound
    assert all(f.category == FaultCategory.ASSERTION_FAILURE for f in e.history[-1].faults)
    # The config deployed; only the assertion failed
    assert all(r.deployment_clean for r in e.trace)


def test_default_bounds_escalate_after_three_attempts_of_ten_rounds(make_ctx):
    ctx = make_ctx("dut_unresponsive")
    case = request_case(expected=["The DUT remains operational."])

    with pytest.raises(AttemptsExhausted) as info:
        generate(case, FineGrainedIntent(script_intents=[case.prompt_text()]), ctx)

    e = info.value
    assert (e.attempts, e.rounds) == (3, 10)
    assert [a.attempt for a in e.history] == [1, 2, 3]
    assert len(e.trace) == 30


def test_without_fault_corrector_no_fixes_are_suggested(make_ctx):
    ctx = make_ctx("description_rejected", use_fault_corrector=False)
    case = request_case()
    result = generate(case, FineGrainedIntent(script_intents=[case.prompt_text()]), ctx)
    assert result.rounds == 2
    assert result.trace[0].fixes == []


def test_correct_prefers_remembered_resolution():
    pool = ExperiencePool()
    pool.record(
        "[config_reject] line 4: ip addres 10.0.0.1/24 - unknown command",
        FaultCategory.SYNTAX_ERROR,
        "replace 'ip addres' with 'ip address'",
    )
    fault = FaultReport(FaultCategory.SYNTAX_ERROR, "[config_reject] line 7: ip addres 10.1.1.1/24 - unknown command")

    remembered = correct(fault, pool, cutoff=0.8)
    assert remembered.fix_text == "replace 'ip addres' with 'ip address'"
    assert remembered.entry is not None

    generic = correct(fault, ExperiencePool(), cutoff=0.8)
    assert generic.entry is None
    assert generic.fix_text.startswith("Correct the spelling")


def test_correct_without_pool_uses_generic_fix():
    fault = FaultReport(FaultCategory.ENVIRONMENT, "[api_error] line 2: wait_seconds 1 - link down")
    assert correct(fault, None).fix_text.startswith("Re-run unchanged")


def test_multi_round_pass_is_remembered(make_ctx, kb):
    ctx = make_ctx("description_rejected")
    case = request_case()
    intents = orchestrate(case, [], ctx.gateway)
    result = generate(case, intents, ctx)

    before = len(kb.pool)
    changes = update_subagents(case, intents, [], result, kb, ctx.options, ctx.run_id)

    assert changes["pool"] == 1
    assert changes["few_shots"] == 0
    assert len(kb.pool) == before + 1
    entry = kb.pool.lookup("[config_reject] line 3: description link to tester port 1 - invalid parameter", 0.8)
    assert entry.resolution == "remove line 'description link to tester port 1'"
    assert entry.provenance == "test"

    # Same fault a second time only bumps the hit count
    again = update_subagents(case, intents, [], result, kb, ctx.options, ctx.run_id)
    assert again["pool"] == 0


def test_fault_fixed_by_a_fresh_attempt_is_remembered(kb, scripted_gateway, sample_dir):
    script = [
        "connect_port 1 GigabitEthernet0/0",
        "configure_port_address 1 10.0.0.2/24",
        "start_peer 1 rip",
        "capture_start 1",
        "send_message 1 Request",
        "capture_stop 1",
        "assert_received 1 Response",
    ]
    config = [
        "hostname DUT",
        "interface GigabitEthernet0/0",
        " ip address 10.0.0.1/24",
        " no shutdown",
        "router rip",
        " version 2",
        " network 10.0.0.0",
    ]
    with_description = config[:2] + [" description link to tester port 1"] + config[2:]
    drafts = [
        json.dumps({"tester_script": script, "dut_config": with_description}),
        json.dumps({"tester_script": script, "dut_config": config}),
    ]
    ctx = ForgeContext(
        kb=kb,
        gateway=scripted_gateway(drafts),
        loop=LoopConfig(max_rounds_per_attempt=1, max_attempts=2),
        profile=load_fault_profile(os.path.join(sample_dir, "faults", "description_rejected.json")),
        run_id="test",
    )
    case = request_case()
    intents = FineGrainedIntent(script_intents=[case.prompt_text()])
    result = generate(case, intents, ctx)
    assert (result.rounds, result.attempt) == (1, 2)

    changes = update_subagents(case, intents, [], result, kb, ctx.options, ctx.run_id)

    assert changes["pool"] == 1
    entry = kb.pool.lookup("[config_reject] line 3: description link to tester port 1 - invalid parameter", 0.8)
    assert entry.resolution == "remove line 'description link to tester port 1'"


def test_first_draft_pass_becomes_a_few_shot(make_ctx, kb):
    ctx = make_ctx()
    case = request_case("TC-0042")
    intents = orchestrate(case, [], ctx.gateway)
    result = generate(case, intents, ctx)

    changes = update_subagents(case, intents, [], result, kb, ctx.options)
    assert changes["few_shots"] == 1
    assert any(e.case_id == "TC-0042" for e in kb.few_shots.examples)


def test_failed_case_only_counts_few_shot_use(kb):
    kb.few_shots.offer("EX-1", "case text", FineGrainedIntent(script_intents=["x"]))
    changes = update_subagents(request_case(), FineGrainedIntent(), ["EX-1"], None, kb, ForgeOptions())

    assert changes == {"pool": 0, "index": 0, "few_shots": 0}
    example = next(e for e in kb.few_shots.examples if e.case_id == "EX-1")
    assert (example.uses, example.passes) == (2, 1)
