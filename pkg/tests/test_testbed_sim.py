"""Simulated DUT configuration, tester API replay and injected faults."""

import os

import pytest

from src.models.testbed import EventKind, FaultProfile, FaultTarget, InjectedFault
from src.services.testbed_sim import CliGrammar, TestbedSession, load_fault_profile, testbed_devices

RIP_CONFIG = """\
! lab DUT
hostname DUT
interface GigabitEthernet0/0
 description link to tester port 1
 ip address 10.0.0.1/24
 no shutdown
router rip
 version 2
 network 10.0.0.0
"""

SETUP = """\
connect_port 1 GigabitEthernet0/0
configure_port_address 1 10.0.0.2/24
start_peer 1 rip
capture_start 1
"""


def kinds(log):
    return [e.kind for e in log.events]


def test_reference_answer_runs_clean(sample_dir):
    answers = os.path.join(sample_dir, "answers")
    with open(os.path.join(answers, "config.TC-0001"), encoding="utf-8") as f:
        config = f.read()
    with open(os.path.join(answers, "script.TC-0001"), encoding="utf-8") as f:
        script = f.read()
    log = TestbedSession().deploy(config, script)
    assert log.is_clean
    assert log.config_event_count == 8
    assert log.api_calls()[-2:] == ["assert_not_received 1 Response", "assert_alive"]


def test_request_is_answered_with_response():
    script = SETUP + "send_message 1 Request\ncapture_stop 1\nassert_received 1 Response\n"
    log = TestbedSession().deploy(RIP_CONFIG, script)
    assert log.is_clean
    assert kinds(log)[-1] == EventKind.ASSERTION_PASS


def test_no_answer_without_a_matching_network():
    config = RIP_CONFIG.replace(" network 10.0.0.0\n", " network 172.16.0.0\n")
    script = SETUP + "send_message 1 Request\nassert_received 1 Response\n"
    log = TestbedSession().deploy(config, script)
    failures = log.failures()
    assert len(failures) == 1
    assert failures[0][1].kind == EventKind.ASSERTION_FAIL
    assert failures[0][1].detail == "Response not received on port 1"


def test_periodic_updates_follow_the_clock():
    script = SETUP + "wait_seconds 29\nassert_not_received 1 Response\nwait_seconds 1\nassert_received 1 Response\n"
    assert TestbedSession().deploy(RIP_CONFIG, script).is_clean


def test_advertised_route_is_learned():
    script = SETUP + "advertise_route 1 192.0.2.0/24\nassert_route 192.0.2.0/24\nstop_peer 1\nassert_route 192.0.2.0/24\n"
    log = TestbedSession().deploy(RIP_CONFIG, script)
    assert kinds(log)[-3:] == [EventKind.ASSERTION_PASS, EventKind.API_CALL, EventKind.ASSERTION_FAIL]


def test_netmask_form_is_accepted():
    config = RIP_CONFIG.replace("ip address 10.0.0.1/24", "ip address 10.0.0.1 255.255.255.0")
    log = TestbedSession().apply_config(config)
    assert log.is_clean


def test_default_route_in_mask_form_is_installed():
    session = TestbedSession()
    log = session.apply_config(RIP_CONFIG + "ip route 0.0.0.0 0.0.0.0 10.0.0.2\n")
    assert log.is_clean
    assert "0.0.0.0/0" in session.dut.routes()


def test_config_rejections():
    config = "interface GigabitEthernet0/0\n ip addres 10.0.0.1/24\ninterface Bogus7\n no shutdown\nversion 2\n"
    log = TestbedSession().apply_config(config)
    details = [(e.line_number, e.kind, e.detail) for e in log.events]
    assert details == [
        (1, EventKind.CONFIG_ACCEPT, ""),
        (2, EventKind.CONFIG_REJECT, "unknown command"),
        (3, EventKind.CONFIG_REJECT, "invalid parameter"),
        (4, EventKind.CONFIG_REJECT, "parent command rejected"),
        (5, EventKind.CONFIG_REJECT, "not valid in global context"),
    ]


def test_api_errors():
    script = "frobnicate 1\nstart_peer 1\nstart_peer 9 rip\nassert_alive\n"
    log = TestbedSession().run_script(script)
    assert [e.detail for e in log.events[:3]] == [
        "unsupported command: frobnicate",
        "invalid argument count for start_peer: expected 2, got 1",
        "invalid argument for start_peer: '9' is not a valid port",
    ]
    assert log.events[3].kind == EventKind.ASSERTION_PASS
    assert log.call_event_count == 4


def test_injected_fault_from_a_sample_profile(sample_dir):
    profile = load_fault_profile(os.path.join(sample_dir, "faults", "description_rejected.json"))
    assert profile.name == "description_rejected"
    log = TestbedSession(profile=profile).apply_config(RIP_CONFIG)
    rejected = [e for _, e in log.failures()]
    assert [(e.line_or_call, e.detail) for e in rejected] == [("description link to tester port 1", "invalid parameter")]


def test_fault_occurrence_only_hits_the_nth_item():
    profile = FaultProfile("second", [InjectedFault("assert_alive", FaultTarget.ASSERTION, "dut hung", occurrence=2)])
    log = TestbedSession(profile=profile).run_script("assert_alive\nassert_alive\nassert_alive\n")
    assert kinds(log) == [EventKind.ASSERTION_PASS, EventKind.ASSERTION_FAIL, EventKind.ASSERTION_PASS]
    assert log.events[1].position == 2


def test_empty_fault_profile_path():
    assert load_fault_profile("").faults == []


def test_grammar_rejects_ambiguous_templates():
    with pytest.raises(ValueError):
        CliGrammar.from_dict({"contexts": {"global": [{"command": "hostname {word}"}, {"command": "hostname {text}"}]}})


def test_testbed_devices():
    assert testbed_devices() == ["DUT", "TESTER"]
