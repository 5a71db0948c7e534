"""Deterministic rule-based stand-in for a language model.

Every agent passes structured hints next to its prompt; the responder answers
from those hints with plain text rules (sentence patterns, keyword lists) and
returns the JSON document the agent's schema expects. The answer is a pure
function of (template_id, prompt, hints), which is what makes recorded
transcripts replayable and offline runs reproducible.

The rules understand RFC prose written in a few common shapes:

* field definitions: ``Name (N bits): description``
* state lists: ``The following states are defined: A, B and C.``
* transitions: ``In the X state, on <event>, the router <action> and moves to the Y state.``
* exchanges: ``The <role> sends a <Msg> message to the <role>, which replies with a <Msg> message.``
* requirements: any sentence with MUST or SHOULD
"""

import difflib
import json
import re
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..errors import BackendUnavailable
from ..logging_config import get_logger
from .line_normalizer import CONFIG, SCRIPT, normalize_line, parse_call

logger = get_logger("offline_responder")

TESTER_PORT = "1"
DUT_INTERFACE = "GigabitEthernet0/0"
DUT_ADDRESS = "10.0.0.1/24"
TESTER_ADDRESS = "10.0.0.2/24"
ADVERTISED_PREFIX = "192.0.2.0/24"
TOPOLOGY = f"Tester port {TESTER_PORT} connected to DUT {DUT_INTERFACE}"
DEFAULT_WAIT = 30

BOUNDARY_KEYWORDS = (
    "invalid", "malformed", "boundary", "maximum", "minimum", "out of range", "out-of-range", "exceeds", "zero",
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")
_MUST = re.compile(r"\bMUST\b")
_SHOULD = re.compile(r"\bSHOULD\b")
_SECTION_REF = re.compile(r"\bSection\s+(\d+(?:\.\d+)*|[A-Z](?:\.\d+)*)\b")
_FIELD = re.compile(r"^([A-Z][A-Za-z ]*?) \((\d+) bits?\):\s*(.*)$")
_STATES = re.compile(r"following states are defined:\s*([^.]+)\.", re.IGNORECASE)
_TRANSITION = re.compile(
    r"In the (\w+) state, (?:on|upon) ([^,]+), the (?:router|DUT|system) ([^.]+?) and moves to the (\w+) state\.",
)
_EXCHANGE = re.compile(
    r"[Tt]he (\w+) sends an? (\w+) message to (?:the|each) (\w+)(?:, which replies with an? (\w+) message)?"
)
_RANGE = re.compile(r"\bbetween \d+ and \d+\b|\brange\b", re.IGNORECASE)
_MESSAGE_IN = re.compile(r"\b([A-Z][A-Za-z]+) message\b")
_PREFIX = re.compile(r"\b\d{1,3}(?:\.\d{1,3}){3}/\d{1,2}\b")

_STEP_MALFORMED = re.compile(r"[Ss]end an? (\w+) message with an invalid ([A-Za-z ]+?) field")
_STEP_SEND = re.compile(r"[Ss]end an? (\w+) message")
_STEP_WAIT = re.compile(r"[Ww]ait (\d+) seconds")
_STEP_ADVERTISE = re.compile(r"[Aa]dvertise (?:the )?route (\d{1,3}(?:\.\d{1,3}){3}/\d{1,2})")
_NOT_SENT = re.compile(r"(?:does not|doesn't|not) send an? (\w+) message")
_SENT = re.compile(r"sends an? (\w+) message")
_REPLACE_FIX = re.compile(r"^replace '(.+)' with '(.+)'$")
_REMOVE_FIX = re.compile(r"^remove line '(.+)'$")


def _flat(text: str) -> str:
    return " ".join(text.split())


def _sentences(text: str) -> List[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(_flat(text)) if s.strip()]


def _paragraphs(text: str) -> List[str]:
    return [_flat(p) for p in re.split(r"\n\s*\n", text) if p.strip()]


def _requirements(text: str) -> List[str]:
    return [s for s in _sentences(text) if _MUST.search(s) or _SHOULD.search(s)]


def _lower_first(text: str) -> str:
    return text[:1].lower() + text[1:] if text else text


def guess_protocol(text: str) -> str:
    lowered = text.lower()
    if "ospf" in lowered or re.search(r"\bHello\b", text):
        return "ospf"
    if "bgp" in lowered or re.search(r"\b(?:Open|Keepalive)\b", text):
        return "bgp"
    return "rip"


def assertion_for(expected: str) -> str:
    """Tester assertion that checks one expected-result sentence."""
    prefix = _PREFIX.search(expected)
    if prefix and "route" in expected.lower():
        return f"assert_route {prefix.group(0)}"
    not_sent = _NOT_SENT.search(expected)
    if not_sent:
        return f"assert_not_received {TESTER_PORT} {not_sent.group(1)}"
    sent = _SENT.search(expected)
    if sent:
        return f"assert_received {TESTER_PORT} {sent.group(1)}"
    lowered = expected.lower()
    if "interface" in lowered and " up" in lowered:
        return f"assert_interface_up {DUT_INTERFACE}"
    return "assert_alive"


def is_boundary_case(case: Dict[str, Any]) -> bool:
    text = " ".join([case.get("title", "")] + case.get("steps", []) + case.get("expected_results", [])).lower()
    return any(k in text for k in BOUNDARY_KEYWORDS)


# ---------------------------------------------------------------------------
# Case construction
# ---------------------------------------------------------------------------


def _case(
    title: str,
    objective: str,
    proto: str,
    actions: List[str],
    expected: List[str],
    sections: List[str],
    parameters: Optional[dict] = None,
) -> Dict[str, Any]:
    steps = [
        f"Configure the DUT interface {DUT_INTERFACE} with {DUT_ADDRESS} and enable {proto}.",
        f"Start a {proto} peer on tester port {TESTER_PORT} and begin capturing.",
    ]
    steps.extend(actions)
    steps.append("Stop the capture and check the DUT response.")
    return {
        "title": title,
        "objective": objective,
        "steps": steps,
        "expected_results": expected,
        "reference_sections": sections,
        "topology": TOPOLOGY,
        "parameters": parameters or {},
    }


def _send(message: str) -> str:
    return f"Send a {message} message from tester port {TESTER_PORT}."


def _received(message: str) -> str:
    return f"The DUT sends a {message} message to tester port {TESTER_PORT}."


def _discarded(message: str, reply: str) -> str:
    return f"The DUT discards the message and does not send a {reply} message to tester port {TESTER_PORT}."


ALIVE = "The DUT remains operational."


def _reply_for(message: str, proto: str) -> str:
    return {"rip": "Response", "ospf": "Hello", "bgp": "Keepalive"}[proto] if message else message


def _basic_case(title: str, objective: str, text: str, sections: List[str]) -> Dict[str, Any]:
    proto = guess_protocol(text)
    request = {"rip": "Request", "ospf": "Hello", "bgp": "Open"}[proto]
    return _case(title, objective, proto, [_send(request)], [_received(_reply_for(request, proto))], sections)


def _malformed_case(title: str, objective: str, text: str, sections: List[str], field: str = "Command") -> Dict[str, Any]:
    proto = guess_protocol(text)
    request = {"rip": "Request", "ospf": "Hello", "bgp": "Open"}[proto]
    reply = _reply_for(request, proto)
    return _case(
        title,
        objective,
        proto,
        [f"Send a {request} message with an invalid {field} field from tester port {TESTER_PORT}."],
        [_discarded(request, reply)],
        sections,
        {"field": field},
    )


def _route_case(title: str, objective: str, text: str, sections: List[str], message: str) -> Dict[str, Any]:
    proto = guess_protocol(text)
    return _case(
        title,
        objective,
        proto,
        [f"Advertise route {ADVERTISED_PREFIX} from tester port {TESTER_PORT}.", _send(message)],
        [f"The DUT installs the route {ADVERTISED_PREFIX} in its routing table.", ALIVE],
        sections,
    )


def _wait_case(title: str, objective: str, text: str, sections: List[str], message: str, seconds: int) -> Dict[str, Any]:
    proto = guess_protocol(text)
    return _case(title, objective, proto, [f"Wait {seconds} seconds."], [_received(message)], sections)


def _alive_case(title: str, objective: str, text: str, sections: List[str]) -> Dict[str, Any]:
    proto = guess_protocol(text)
    request = {"rip": "Request", "ospf": "Hello", "bgp": "Open"}[proto]
    return _case(title, objective, proto, [_send(request)], [ALIVE], sections)


def _case_for_point(point: Dict[str, Any]) -> Dict[str, Any]:
    params = point.get("parameters", {})
    title, objective = point.get("title", ""), point.get("objective", "")
    sections = list(point.get("reference_sections", []))
    text = f"{title} {objective}"
    lowered = objective.lower()

    if "field" in params:
        field = str(params["field"]).replace(" ", "_")
        if params.get("constraints"):
            return _malformed_case(f"Invalid {params['field']} field is discarded", objective, text, sections, field)
        return _basic_case(f"Well-formed {params['field']} field is accepted", objective, text, sections)

    if "source" in params:
        event = params.get("event", "")
        message = _MESSAGE_IN.search(event)
        if "install" in lowered and "route" in lowered:
            return _route_case(point["title"], objective, text, sections, message.group(1) if message else "Response")
        if message:
            replies = _SENT.findall(objective)
            proto = guess_protocol(text)
            expected = [_received(replies[0])] if replies else [ALIVE]
            return _case(point["title"], objective, proto, [_send(message.group(1))], expected, sections)
        proto = guess_protocol(text)
        return _case(point["title"], objective, proto, ["Wait 180 seconds."], [ALIVE], sections)

    if "message_type" in params:
        message = params["message_type"]
        if params.get("sender_role") in ("router", "dut"):
            return _wait_case(point["title"], objective, text, sections, message, DEFAULT_WAIT)
        if "install" in lowered and "route" in lowered:
            return _route_case(point["title"], objective, text, sections, message)
        reply = re.search(r"replies with an? (\w+) message", objective)
        proto = guess_protocol(text)
        expected = [_received(reply.group(1))] if reply else [ALIVE]
        return _case(point["title"], objective, proto, [_send(message)], expected, sections)

    if "seconds" in lowered or "timer" in lowered:
        proto = guess_protocol(text)
        periodic = {"rip": "Response", "ospf": "Hello", "bgp": "Keepalive"}[proto]
        return _wait_case(point["title"], objective, text, sections, periodic, DEFAULT_WAIT)
    if "discard" in lowered or "ignore" in lowered:
        return _malformed_case(point["title"], objective, text, sections)
    if "install" in lowered and "route" in lowered:
        return _route_case(point["title"], objective, text, sections, "Response")
    return _alive_case(point["title"], objective, text, sections)


# ---------------------------------------------------------------------------
# Artifact construction
# ---------------------------------------------------------------------------


def _dut_config(proto: str) -> List[str]:
    lines = [
        "hostname DUT",
        f"interface {DUT_INTERFACE}",
        f" description link to tester port {TESTER_PORT}",
        " ip address 10.0.0.1 255.255.255.0",
        " no shutdown",
    ]
    if proto == "ospf":
        lines += ["router ospf 1", " network 10.0.0.0/24 area 0"]
    elif proto == "bgp":
        lines += ["router bgp 65001", " neighbor 10.0.0.2 remote-as 65002"]
    else:
        lines += ["router rip", " version 2", " network 10.0.0.0"]
    return lines


def _actions(step: str) -> List[str]:
    malformed = _STEP_MALFORMED.search(step)
    if malformed:
        return [f"send_malformed {TESTER_PORT} {malformed.group(1)} {malformed.group(2).strip().replace(' ', '_')}"]
    advertise = _STEP_ADVERTISE.search(step)
    if advertise:
        return [f"advertise_route {TESTER_PORT} {advertise.group(1)}"]
    send = _STEP_SEND.search(step)
    if send:
        return [f"send_message {TESTER_PORT} {send.group(1)}"]
    wait = _STEP_WAIT.search(step)
    if wait:
        return [f"wait_seconds {wait.group(1)}"]
    return []


def _tester_script(case: Dict[str, Any], proto: str) -> List[str]:
    script = [
        f"connect_port {TESTER_PORT} {DUT_INTERFACE}",
        f"configure_port_address {TESTER_PORT} {TESTER_ADDRESS}",
        f"start_peer {TESTER_PORT} {proto}",
        f"capture_start {TESTER_PORT}",
    ]
    for step in case.get("steps", []):
        script.extend(_actions(step))
    script.append(f"capture_stop {TESTER_PORT}")
    for expected in case.get("expected_results", []):
        assertion = assertion_for(expected)
        if assertion not in script:
            script.append(assertion)
    return script


def _drop_config_line(config: List[str], index: int) -> List[str]:
    """Remove a config line and, for a top-level line, the indented lines under it."""
    if index < 0 or index >= len(config):
        return config
    result = config[:index]
    rest = config[index + 1:]
    if not config[index].startswith(" "):
        while rest and rest[0].startswith(" "):
            rest = rest[1:]
    return result + rest


def _fix_command(line: str, heads: List[str]) -> str:
    """Replace a misspelled command head with the closest known one."""
    indent = line[: len(line) - len(line.lstrip())]
    words = line.split()
    best, best_ratio = None, 0.0
    for head in heads:
        size = len(head.split())
        if size > len(words):
            continue
        candidate = " ".join(words[:size])
        ratio = difflib.SequenceMatcher(None, candidate.lower(), head.lower()).ratio()
        if ratio > best_ratio:
            best, best_ratio = head, ratio
    if best is None or best_ratio < 0.8:
        return line
    size = len(best.split())
    return indent + " ".join([best] + words[size:])


def _apply_pool_fixes(lines: List[str], kind: str, fixes: List[str]) -> List[str]:
    out = list(lines)
    for fix in fixes:
        replace = _REPLACE_FIX.match(fix)
        if replace:
            old, new = replace.groups()
            out = [line.replace(old, new) if old in line else line for line in out]
            continue
        remove = _REMOVE_FIX.match(fix)
        if remove:
            target = remove.group(1)
            kept = []
            skipping = False
            for line in out:
                if skipping and line.startswith(" "):
                    continue
                skipping = False
                if normalize_line(line, kind) == target:
                    skipping = kind == CONFIG and not line.startswith(" ")
                    continue
                kept.append(line)
            out = kept
    return out


# ---------------------------------------------------------------------------
# Responder
# ---------------------------------------------------------------------------


class OfflineResponder:
    """Answers every agent template from its hints."""

    def __init__(self):
        self._rules: Dict[str, Callable[[str, Dict[str, Any]], Any]] = {
            "section_summary": self._section_summary,
            "protocol_summary": self._protocol_summary,
            "module_formation": self._module_formation,
            "module_completion": self._module_completion,
            "field_modeling": self._field_modeling,
            "fsm_framework": self._fsm_framework,
            "fsm_section": self._fsm_section,
            "sequence_modeling": self._sequence_modeling,
            "protocol_specific": self._protocol_specific,
            "testcase_generation": self._testcase_generation,
            "depth_judge": self._depth_judge,
            "breadth_supplement": self._breadth_supplement,
            "depth_supplement": self._depth_supplement,
            "orchestrator": self._orchestrator,
            "artifact_draft": self._artifact_draft,
            "artifact_redraft": self._artifact_redraft,
            "case_regeneration": self._case_regeneration,
        }

    def respond(self, template_id: str, prompt: str, hints: Optional[Dict[str, Any]] = None) -> str:
        rule = self._rules.get(template_id)
        if rule is None:
            raise BackendUnavailable(f"offline responder has no rule for template '{template_id}'")
        answer = rule(prompt, hints or {})
        return json.dumps(answer, sort_keys=True)

    # -- analysis -----------------------------------------------------------

    @staticmethod
    def classify(number: str, title: str, content: str) -> Tuple[str, int]:
        n_must = len(_MUST.findall(content))
        n_should = len(_SHOULD.findall(content))
        if number[:1].isalpha() or title.lower().startswith("appendix"):
            return "appendix", min(100, 15 * n_must + 5 * n_should)
        if "configur" in title.lower():
            base = "configuration"
        elif n_must or n_should or any(_FIELD.match(p) for p in _paragraphs(content)):
            base = "functional"
        else:
            return "descriptive", 5
        return base, min(100, 20 + 15 * n_must + 5 * n_should)

    def _section_summary(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        number, title, content = hints.get("section_number", ""), hints.get("title", ""), hints.get("content", "")
        classification, importance = self.classify(number, title, content)
        sentences = _sentences(content)
        summary = " ".join(sentences[:2]) if sentences else title
        refs = []
        for ref in _SECTION_REF.findall(content):
            if ref != number and ref not in refs:
                refs.append(ref)
        return {
            "summary": summary,
            "references": refs,
            "classification": classification,
            "test_importance": importance,
        }

    def _protocol_summary(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        title, abstract = hints.get("title", ""), hints.get("abstract", "")
        return {"protocol_summary": f"{title}. {abstract}".strip()}

    @staticmethod
    def _top(number: str) -> str:
        return number.split(".")[0]

    @staticmethod
    def _agent_for(text: str) -> str:
        lowered = text.lower()
        if "state" in lowered and "transition" in lowered:
            return "fsm"
        if any(_FIELD.match(p) for p in _paragraphs(text)):
            return "packet_field"
        if _EXCHANGE.search(_flat(text)) or " timer" in lowered:
            return "time_sequence"
        return "protocol_specific"

    def _group(self, sections: List[dict]) -> Dict[str, List[dict]]:
        groups: Dict[str, List[dict]] = {}
        for section in sections:
            groups.setdefault(self._top(section["section_number"]), []).append(section)
        return groups

    def _module_formation(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        modules = []
        for top, sections in self._group(hints.get("sections", [])).items():
            selected = [s for s in sections if s.get("test_importance", 0) >= 34]
            if not selected:
                continue
            name = next((s["title"] for s in sections if s["section_number"] == top), f"Section {top}")
            text = "\n\n".join(s["content"] for s in sections)
            modules.append({
                "module_name": name,
                "description": f"Requirements of section {top} ({name}).",
                "assigned_agent": self._agent_for(text),
                "section_numbers": [s["section_number"] for s in selected],
            })
        return {"modules": modules}

    def _module_completion(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        existing = hints.get("modules", [])
        modules = []
        for top, sections in self._group(hints.get("sections", [])).items():
            owner = next(
                (m for m in existing if any(self._top(n) == top for n in m.get("section_numbers", []))), None
            )
            if owner is not None:
                name, agent = owner["module_name"], owner["assigned_agent"]
            else:
                name = next((s["title"] for s in sections if s["section_number"] == top), f"Section {top}")
                agent = self._agent_for("\n\n".join(s["content"] for s in sections))
            modules.append({
                "module_name": name,
                "description": f"Requirements of section {top} ({name}).",
                "assigned_agent": agent,
                "section_numbers": [s["section_number"] for s in sections],
            })
        return {"modules": modules}

    # -- low-level modeling -------------------------------------------------

    def _field_modeling(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        number = hints.get("section_number", "")
        offset = 0
        fields = []
        for paragraph in _paragraphs(hints.get("content", "")):
            match = _FIELD.match(paragraph)
            if not match:
                continue
            name, width, description = match.group(1).strip(), int(match.group(2)), match.group(3)
            sentences = _sentences(description)
            constraints = [s for s in sentences if _MUST.search(s) or _SHOULD.search(s)]
            reaction = next(
                (s for s in sentences if re.search(r"discard|ignore|respond", s, re.IGNORECASE)), ""
            )
            fields.append({
                "field_name": name,
                "offset_bits": offset,
                "width_bits": width,
                "value_constraints": constraints,
                "expected_response": reaction,
                "source_sections": [number],
            })
            offset += width
        return {"fields": fields}

    @staticmethod
    def _states(content: str) -> List[str]:
        match = _STATES.search(_flat(content))
        if not match:
            return []
        return [s.strip() for s in re.split(r",|\band\b", match.group(1)) if s.strip()]

    def _transitions(self, content: str, number: str) -> List[dict]:
        transitions = []
        for source, event, action, target in _TRANSITION.findall(_flat(content)):
            transitions.append({
                "source": source,
                "target": target,
                "event": event.strip(),
                "action": action.strip(),
                "constraints": [],
                "source_sections": [number] if number else [],
            })
        return transitions

    def _fsm_framework(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        return {"states": self._states(hints.get("content", "")), "transitions": []}

    def _fsm_section(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        content = hints.get("content", "")
        return {
            "states": self._states(content),
            "transitions": self._transitions(content, hints.get("section_number", "")),
        }

    def _sequence_modeling(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        number = hints.get("section_number", "")
        count = hints.get("step_count", 0)
        steps = []
        sentences = _sentences(hints.get("content", ""))
        for index, sentence in enumerate(sentences):
            match = _EXCHANGE.search(sentence)
            if not match:
                continue
            sender, message, receiver, reply = match.groups()
            if reply:
                expected = f"the {receiver} replies with a {reply} message"
            else:
                follow = sentences[index + 1] if index + 1 < len(sentences) else ""
                expected = _lower_first(follow.rstrip(".")) if follow.lower().startswith(f"the {receiver}") else ""
            step_id = f"s{count + len(steps) + 1}"
            steps.append({
                "step_id": step_id,
                "sender_role": sender.lower(),
                "receiver_role": receiver.lower(),
                "message_type": message,
                "ordering_constraints": [steps[-1]["step_id"]] if steps else [],
                "expected_response": expected,
                "source_sections": [number],
            })
        return {"steps": steps}

    def _protocol_specific(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        number, title = hints.get("section_number", ""), hints.get("title", "")
        points = []
        for i, sentence in enumerate(_requirements(hints.get("content", ""))[:4], 1):
            points.append({
                "title": f"{title}: requirement {i}",
                "objective": f"Verify that {_lower_first(sentence)}",
                "parameters": {"requirement": sentence},
                "reference_sections": [number],
                "additional_tools_required": ["zen-solver"] if _RANGE.search(sentence) else [],
            })
        return {"testing_points": points}

    # -- test cases ---------------------------------------------------------

    def _testcase_generation(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        return _case_for_point(hints.get("point", {}))

    def _depth_judge(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        cases = hints.get("cases", [])
        n_boundary = sum(1 for c in cases if is_boundary_case(c))
        basic = min(100, 60 + 15 * len(cases))
        boundary = min(100, 40 + 40 * n_boundary)
        suggestions = []
        if basic < 90:
            suggestions.append("Add a test case for the basic behaviour of the section.")
        if boundary < 78:
            suggestions.append("Add a test case with a malformed or out-of-range message.")
        return {
            "basic_function_score": basic,
            "boundary_case_score": boundary,
            "rationale": f"{len(cases)} case(s), {n_boundary} exercising boundary or malformed input.",
            "suggestions": suggestions,
        }

    def _section_cases(self, hints: Dict[str, Any], basic: bool, boundary: bool) -> List[Dict[str, Any]]:
        number, title = hints.get("section_number", ""), hints.get("title", "")
        text = f"{title} {hints.get('content', '')}"
        cases = []
        if basic:
            cases.append(_basic_case(
                f"{title}: basic behaviour", f"Verify the basic behaviour described in section {number}.", text, [number]
            ))
        if boundary:
            cases.append(_malformed_case(
                f"{title}: malformed input", f"Verify that section {number} holds for invalid input.", text, [number]
            ))
        return cases

    def _breadth_supplement(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        return {"test_cases": self._section_cases(hints, True, True)}

    def _depth_supplement(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        basic = hints.get("basic_function_score", 0) < 90
        boundary = hints.get("boundary_case_score", 0) < 78
        return {"test_cases": self._section_cases(hints, basic, boundary)}

    # -- artifacts ----------------------------------------------------------

    def _orchestrator(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        case = hints.get("case", {})
        proto = guess_protocol(" ".join(case.get("steps", [])))
        config, script = [], []
        for step in case.get("steps", []):
            if step.startswith("Configure the DUT"):
                config += [
                    f"Configure interface {DUT_INTERFACE} with {DUT_ADDRESS} and bring it up",
                    f"Enable {proto} on the network of {DUT_INTERFACE}",
                ]
            else:
                script.append(step.rstrip("."))
        return {
            "script_intents": script,
            "config_intents": config,
            "topology_intents": [case.get("topology") or TOPOLOGY],
        }

    def _artifact_draft(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        case = hints.get("case", {})
        proto = guess_protocol(" ".join(case.get("steps", [])))
        return {"tester_script": _tester_script(case, proto), "dut_config": _dut_config(proto)}

    def _artifact_redraft(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        script = _apply_pool_fixes(hints.get("script", []), SCRIPT, hints.get("fixes", []))
        config = _apply_pool_fixes(hints.get("config", []), CONFIG, hints.get("fixes", []))
        pool_changed = script != hints.get("script", []) or config != hints.get("config", [])
        apis = hints.get("apis", [])
        heads = hints.get("grammar_heads", [])

        config_drops, script_drops = set(), set()
        config_edits: Dict[int, str] = {}
        script_edits: Dict[int, str] = {}
        for fault in hints.get("faults", []):
            index = (fault.get("line_number") or 0) - 1
            category, kind, detail = fault.get("category"), fault.get("kind"), fault.get("detail", "")
            if pool_changed:
                break
            if kind == "config_reject" and 0 <= index < len(config):
                if detail == "parent command rejected":
                    continue
                if category == "syntax_error":
                    fixed = _fix_command(config[index], heads)
                    if fixed != config[index]:
                        config_edits[index] = fixed
                        continue
                config_drops.add(index)
            elif kind == "api_error" and 0 <= index < len(script):
                if category == "environment":
                    continue
                if category == "unsupported_command":
                    parsed = parse_call(script[index])
                    name = parsed[0] if parsed else ""
                    close = difflib.get_close_matches(name, apis, n=1, cutoff=0.6)
                    if close and close[0] != name:
                        script_edits[index] = script[index].replace(name, close[0], 1)
                        continue
                script_drops.add(index)
            elif kind == "assertion_fail" and fault.get("line_or_call") == "(end of script)":
                script.append("assert_alive")

        for index, line in config_edits.items():
            config[index] = line
        for index, line in script_edits.items():
            script[index] = line
        for index in sorted(config_drops, reverse=True):
            config = _drop_config_line(config, index)
        script = [line for i, line in enumerate(script) if i not in script_drops]
        return {"tester_script": script or ["assert_alive"], "dut_config": config}

    def _case_regeneration(self, prompt: str, hints: Dict[str, Any]) -> Dict[str, Any]:
        case = hints.get("case", {})
        evidence = hints.get("evidence", "")
        kept = [
            e for e in case.get("expected_results", []) if assertion_for(e).split()[0] not in evidence
        ]
        return {
            "title": f"{case.get('title', '')} (revised)",
            "objective": case.get("objective", ""),
            "steps": list(case.get("steps", [])),
            "expected_results": kept or [ALIVE],
            "reference_sections": list(case.get("reference_sections", [])),
            "topology": case.get("topology", TOPOLOGY),
            "parameters": dict(case.get("parameters", {})),
        }
