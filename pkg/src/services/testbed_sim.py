"""Simulated tester and device under test.

A session validates a DUT configuration against the CLI grammar, then replays a
tester script against the API registry while keeping a small model of what the
DUT would do: interfaces, enabled protocols, routes and the messages it answers
with. Everything is deterministic; the only randomness-free knob is the fault
profile, which forces failures where its triggers match.
"""

import ipaddress
import json
import os
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from ciscoconfparse import CiscoConfParse

from ..data import data_path
from ..logging_config import get_logger
from ..models.testbed import (
    EventKind,
    ExecutionEvent,
    ExecutionLog,
    FaultProfile,
    FaultTarget,
    TesterApiRegistry,
)
from .line_normalizer import CONFIG, EquivalenceRules, default_rules, normalize_line, parse_call

logger = get_logger("testbed_sim")

_INTERFACE = re.compile(r"^(?:GigabitEthernet|TenGigabitEthernet|FastEthernet|Ethernet)\d+(?:/\d+)+$|^Loopback\d+$")
_WORD = re.compile(r"^[A-Za-z0-9_.:-]+$")
_MESSAGE = re.compile(r"^[A-Z][A-Za-z]*$")
_SLOT = re.compile(r"^\{(\w+)(?::(\d+)-(\d+))?\}$")

PROTOCOLS = ("rip", "ospf", "bgp")


def _is_int(value: str, low: Optional[int] = None, high: Optional[int] = None) -> bool:
    if not value.isdigit():
        return False
    number = int(value)
    return (low is None or number >= low) and (high is None or number <= high)


def _is_ipv4(value: str) -> bool:
    try:
        ipaddress.IPv4Address(value)
        return True
    except ipaddress.AddressValueError:
        return False


def _is_prefix(value: str) -> bool:
    if "/" not in value:
        return False
    try:
        ipaddress.IPv4Interface(value)
        return True
    except (ipaddress.AddressValueError, ipaddress.NetmaskValueError, ValueError):
        return False


PARAM_VALIDATORS: Dict[str, Callable[[str], bool]] = {
    "port": lambda v: _is_int(v, 1, 8),
    "interface": lambda v: bool(_INTERFACE.match(v)),
    "ipv4": _is_ipv4,
    "ipv4_prefix": _is_prefix,
    "int": _is_int,
    "seconds": lambda v: _is_int(v, 0, 86400),
    "word": lambda v: bool(_WORD.match(v)),
    "message": lambda v: bool(_MESSAGE.match(v)),
    "protocol": lambda v: v.lower() in PROTOCOLS,
    "text": lambda v: bool(v),
    "any": lambda v: True,
}


# ---------------------------------------------------------------------------
# CLI grammar
# ---------------------------------------------------------------------------


@dataclass
class CommandTemplate:
    """One command of a CLI context, e.g. ``network {ipv4_prefix} area {int}``."""

    command: str
    enters: Optional[str] = None
    effect: Optional[str] = None

    def __post_init__(self):
        self.tokens = self.command.split()
        self.head = self.tokens[0]

    @property
    def pattern(self) -> Tuple[str, ...]:
        """Literal tokens with slots collapsed; two templates may not share one."""
        return tuple("{}" if _SLOT.match(t) else t for t in self.tokens)

    def match(self, words: List[str]) -> Tuple[str, List[str]]:
        """Return (status, slot values); status is ok, nomatch, invalid, incomplete or extra."""
        values: List[str] = []
        for i, token in enumerate(self.tokens):
            slot = _SLOT.match(token)
            if slot and slot.group(1) == "text":
                if i >= len(words):
                    return "incomplete", values
                values.append(" ".join(words[i:]))
                return "ok", values
            if i >= len(words):
                return "incomplete", values
            word = words[i]
            if slot is None:
                if word.lower() != token.lower():
                    return "nomatch", values
                continue
            kind, low, high = slot.group(1), slot.group(2), slot.group(3)
            if kind == "int" and low is not None:
                valid = _is_int(word, int(low), int(high))
            else:
                valid = PARAM_VALIDATORS.get(kind, PARAM_VALIDATORS["any"])(word)
            if not valid:
                return "invalid", values
            values.append(word)
        if len(words) > len(self.tokens):
            return "extra", values
        return "ok", values


@dataclass
class GrammarMatch:
    accepted: bool
    template: Optional[CommandTemplate] = None
    values: List[str] = field(default_factory=list)
    detail: str = ""


class CliGrammar:
    """Command templates per configuration context."""

    def __init__(self, contexts: Dict[str, List[CommandTemplate]]):
        for name, templates in contexts.items():
            seen = set()
            for template in templates:
                if template.pattern in seen:
                    raise ValueError(f"Ambiguous grammar: '{template.command}' repeated in context '{name}'")
                seen.add(template.pattern)
        self.contexts = contexts

    @classmethod
    def from_dict(cls, data: dict) -> "CliGrammar":
        contexts = {}
        for name, items in data.get("contexts", {}).items():
            contexts[name] = [
                CommandTemplate(item["command"], item.get("enters"), item.get("effect")) for item in items
            ]
        return cls(contexts)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "CliGrammar":
        path = path or data_path("cli_grammar.json")
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def _match_in(self, context: str, words: List[str]) -> Tuple[Optional[GrammarMatch], Set[str]]:
        statuses: Set[str] = set()
        for template in self.contexts.get(context, []):
            status, values = template.match(words)
            if status == "ok":
                return GrammarMatch(True, template, values), statuses
            statuses.add(status)
        return None, statuses

    def match(self, context: str, line: str) -> GrammarMatch:
        words = line.split()
        found, statuses = self._match_in(context, words)
        if found:
            return found
        if statuses & {"invalid", "extra"}:
            return GrammarMatch(False, detail="invalid parameter")
        if "incomplete" in statuses:
            return GrammarMatch(False, detail="incomplete command")
        for other in self.contexts:
            if other != context and self._match_in(other, words)[0] is not None:
                return GrammarMatch(False, detail=f"not valid in {context} context")
        return GrammarMatch(False, detail="unknown command")

    def heads(self, context: Optional[str] = None) -> List[str]:
        """Literal command prefixes, used when fuzzy-fixing a mistyped line."""
        names = [context] if context else list(self.contexts)
        out = []
        for name in names:
            for template in self.contexts.get(name, []):
                literal = []
                for token in template.tokens:
                    if _SLOT.match(token):
                        break
                    literal.append(token)
                head = " ".join(literal)
                if head and head not in out:
                    out.append(head)
        return out


def load_registry(path: Optional[str] = None) -> TesterApiRegistry:
    path = path or data_path("tester_api.json")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    registry = TesterApiRegistry.from_dict(data)
    for entry in registry.entries.values():
        unknown = [p for p in entry.parameters if p not in PARAM_VALIDATORS]
        if unknown:
            raise ValueError(f"API {entry.name}: unknown parameter validator(s) {unknown}")
    return registry


def testbed_devices(path: Optional[str] = None) -> List[str]:
    """Device names the testbed exposes; a KB inventory may only name these."""
    path = path or data_path("tester_api.json")
    with open(path, "r", encoding="utf-8") as f:
        return list(json.load(f).get("devices", []))


def load_behaviour(path: Optional[str] = None) -> Dict[str, dict]:
    path = path or data_path("dut_behaviour.json")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f).get("protocols", {})


def load_fault_profile(path: Optional[str]) -> FaultProfile:
    """Load a fault profile file; an empty path means no injected faults."""
    if not path:
        return FaultProfile()
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    data.setdefault("name", os.path.splitext(os.path.basename(path))[0])
    return FaultProfile.from_dict(data)


# ---------------------------------------------------------------------------
# Device and tester state
# ---------------------------------------------------------------------------


@dataclass
class InterfaceState:
    name: str
    address: Optional[ipaddress.IPv4Interface] = None
    up: bool = False


@dataclass
class DutState:
    hostname: str = "Router"
    interfaces: Dict[str, InterfaceState] = field(default_factory=dict)
    # protocol -> {"networks": [...], "neighbors": [...], "version": n}
    protocols: Dict[str, dict] = field(default_factory=dict)
    static_routes: List[str] = field(default_factory=list)
    learned_routes: Dict[str, int] = field(default_factory=dict)

    def interface(self, name: str) -> InterfaceState:
        return self.interfaces.setdefault(name, InterfaceState(name))

    def connected_routes(self) -> List[str]:
        return [
            str(i.address.network) for i in self.interfaces.values() if i.up and i.address is not None
        ]

    def routes(self) -> Set[str]:
        return set(self.connected_routes()) | set(self.static_routes) | set(self.learned_routes)


@dataclass
class PortState:
    number: int
    interface: Optional[str] = None
    address: Optional[ipaddress.IPv4Interface] = None
    peer: Optional[str] = None
    advertised: List[str] = field(default_factory=list)
    capturing: bool = False
    captured: List[str] = field(default_factory=list)


def _classful(address: ipaddress.IPv4Address) -> ipaddress.IPv4Network:
    first = int(str(address).split(".")[0])
    length = 8 if first < 128 else 16 if first < 192 else 24
    return ipaddress.IPv4Network(f"{address}/{length}", strict=False)


class TestbedSession:
    """One deployment: a fresh DUT and tester, a config, then a script."""

    __test__ = False  # not a pytest class

    def __init__(
        self,
        profile: Optional[FaultProfile] = None,
        grammar: Optional[CliGrammar] = None,
        registry: Optional[TesterApiRegistry] = None,
        behaviour: Optional[Dict[str, dict]] = None,
        rules: Optional[EquivalenceRules] = None,
    ):
        self.profile = profile or FaultProfile()
        self.grammar = grammar or CliGrammar.load()
        self.registry = registry or load_registry()
        self.behaviour = behaviour if behaviour is not None else load_behaviour()
        self.rules = rules or default_rules()
        self.dut = DutState()
        self.ports: Dict[int, PortState] = {}
        self.clock = 0
        self.config_applied = False

    # -- configuration ------------------------------------------------------

    def _effective_lines(self, config_text: str) -> List[Tuple[int, str]]:
        lines = []
        for number, raw in enumerate(config_text.splitlines(), 1):
            stripped = raw.strip()
            if not stripped or self.rules.is_comment(stripped, CONFIG):
                continue
            lines.append((number, raw.rstrip()))
        return lines

    def apply_config(self, config_text: str) -> ExecutionLog:
        """Validate and apply a DUT config; one accept or reject event per effective line."""
        log = ExecutionLog()
        effective = self._effective_lines(config_text)
        self.config_applied = True
        if not effective:
            return log

        parsed = CiscoConfParse([raw for _, raw in effective])
        # Context each accepted parent line opened, with its slot values
        opened: Dict[int, Tuple[str, List[str]]] = {}
        rejected: Set[int] = set()

        for index, obj in enumerate(parsed.ConfigObjs):
            line_number = effective[obj.linenum][0] if obj.linenum < len(effective) else effective[index][0]
            text = normalize_line(obj.text, CONFIG, self.rules) or obj.text.strip()
            position = index + 1
            parent = obj.parent if obj.parent is not None and obj.parent is not obj else None

            def reject(detail: str) -> None:
                rejected.add(obj.linenum)
                log.events.append(ExecutionEvent(EventKind.CONFIG_REJECT, text, detail, line_number, position))

            fault = self.profile.first_match(FaultTarget.CONFIG, text, position)
            if fault is not None:
                reject(fault.detail)
                continue

            if parent is None:
                context, parent_values = "global", []
            elif parent.linenum in rejected:
                reject("parent command rejected")
                continue
            elif parent.linenum in opened:
                context, parent_values = opened[parent.linenum]
            else:
                reject("not valid in context")
                continue

            match = self.grammar.match(context, text)
            if not match.accepted:
                reject(match.detail)
                continue
            if match.template.enters:
                opened[obj.linenum] = (match.template.enters, match.values)
            self._apply_effect(match.template.effect, match.values, context, parent_values, text)
            log.events.append(ExecutionEvent(EventKind.CONFIG_ACCEPT, text, "", line_number, position))

        logger.debug(f"Config applied: {len(log)} line(s), {len(log.failures())} rejected")
        return log

    def _apply_effect(
        self, effect: Optional[str], values: List[str], context: str, parent_values: List[str], text: str
    ) -> None:
        if effect is None:
            return
        dut = self.dut
        if effect == "hostname":
            dut.hostname = values[0]
        elif effect == "interface":
            dut.interface(values[0])
        elif effect == "enable_protocol":
            proto = text.split()[1].lower()
            dut.protocols.setdefault(proto, {"networks": [], "neighbors": [], "version": 1})
        elif effect == "static_route":
            network = ipaddress.IPv4Interface(values[0]).network
            dut.static_routes.append(str(network))
        elif effect == "set_address":
            dut.interface(parent_values[0]).address = ipaddress.IPv4Interface(values[0])
        elif effect == "no_shutdown":
            dut.interface(parent_values[0]).up = True
        elif effect == "shutdown":
            dut.interface(parent_values[0]).up = False
        elif effect == "set_version":
            dut.protocols["rip"]["version"] = int(values[0])
        elif effect == "add_network":
            proto = context.split()[1]
            dut.protocols[proto]["networks"].append(values[0])
        elif effect == "add_neighbor":
            dut.protocols["bgp"]["neighbors"].append(values[0])

    # -- protocol model -----------------------------------------------------

    def _dut_interface_for(self, port: PortState) -> Optional[InterfaceState]:
        if port.interface is None:
            return None
        iface = self.dut.interfaces.get(port.interface)
        if iface is None or not iface.up or iface.address is None:
            return None
        return iface

    def _protocol_active(self, proto: str, port: PortState) -> bool:
        """The DUT runs ``proto`` towards the interface the port is cabled to."""
        config = self.dut.protocols.get(proto)
        iface = self._dut_interface_for(port)
        if config is None or iface is None:
            return False
        if proto == "rip":
            return any(
                _is_ipv4(n) and _classful(ipaddress.IPv4Address(n)) == _classful(iface.address.ip)
                for n in config["networks"]
            )
        if proto == "ospf":
            return any(
                iface.address.ip in ipaddress.IPv4Interface(n).network for n in config["networks"]
            )
        if proto == "bgp":
            return port.address is not None and str(port.address.ip) in config["neighbors"]
        return False

    def _emit(self, port: PortState, message: str) -> None:
        if port.capturing:
            port.captured.append(message)

    def _learn(self, port: PortState) -> None:
        if port.peer and self._protocol_active(port.peer, port):
            for prefix in port.advertised:
                self.dut.learned_routes[prefix] = port.number

    def _withdraw(self, port: PortState) -> None:
        for prefix in [p for p, n in self.dut.learned_routes.items() if n == port.number]:
            del self.dut.learned_routes[prefix]

    # -- tester API ---------------------------------------------------------

    def _port(self, value: str) -> PortState:
        number = int(value)
        return self.ports.setdefault(number, PortState(number))

    def _execute(self, name: str, args: List[str]) -> Tuple[bool, str]:
        """Run one validated call; returns (ok, detail). Only assertions can fail here."""
        if name == "connect_port":
            self._port(args[0]).interface = args[1]
        elif name == "configure_port_address":
            self._port(args[0]).address = ipaddress.IPv4Interface(args[1])
        elif name == "start_peer":
            port = self._port(args[0])
            port.peer = args[1].lower()
            self._learn(port)
        elif name == "stop_peer":
            port = self._port(args[0])
            self._withdraw(port)
            port.peer = None
        elif name == "advertise_route":
            port = self._port(args[0])
            prefix = str(ipaddress.IPv4Interface(args[1]).network)
            if prefix not in port.advertised:
                port.advertised.append(prefix)
            self._learn(port)
        elif name == "send_message":
            port = self._port(args[0])
            proto = port.peer
            if proto and self._protocol_active(proto, port):
                for reply in self.behaviour.get(proto, {}).get("responses", {}).get(args[1], []):
                    self._emit(port, reply)
        elif name == "send_malformed":
            pass
        elif name == "capture_start":
            port = self._port(args[0])
            port.capturing = True
            port.captured = []
        elif name == "capture_stop":
            self._port(args[0]).capturing = False
        elif name == "wait_seconds":
            self._advance(int(args[0]))
        elif name.startswith("assert_"):
            return self._assert(name, args)
        return True, ""

    def _advance(self, seconds: int) -> None:
        start, self.clock = self.clock, self.clock + seconds
        for port in self.ports.values():
            proto = port.peer
            if not proto or not self._protocol_active(proto, port):
                continue
            periodic = self.behaviour.get(proto, {}).get("periodic")
            if not periodic:
                continue
            interval = periodic["interval"]
            ticks = self.clock // interval - start // interval
            for _ in range(ticks):
                self._emit(port, periodic["message"])

    def _assert(self, name: str, args: List[str]) -> Tuple[bool, str]:
        if name == "assert_alive":
            return True, ""
        if name == "assert_interface_up":
            iface = self.dut.interfaces.get(args[0])
            ok = iface is not None and iface.up and iface.address is not None
            return ok, "" if ok else f"interface {args[0]} is not up"
        if name == "assert_route":
            prefix = str(ipaddress.IPv4Interface(args[0]).network)
            ok = prefix in self.dut.routes()
            return ok, "" if ok else f"route {prefix} not in DUT table"
        port = self._port(args[0])
        seen = args[1] in port.captured
        if name == "assert_received":
            return seen, "" if seen else f"{args[1]} not received on port {port.number}"
        if name == "assert_not_received":
            return not seen, "" if not seen else f"{args[1]} unexpectedly received on port {port.number}"
        return True, ""

    def _validate(self, name: str, args: List[str]) -> Optional[str]:
        entry = self.registry.get(name)
        if entry is None:
            return f"unsupported command: {name}"
        if len(args) != entry.arity:
            return f"invalid argument count for {name}: expected {entry.arity}, got {len(args)}"
        for param, value in zip(entry.parameters, args):
            if not PARAM_VALIDATORS[param](value):
                return f"invalid argument for {name}: {value!r} is not a valid {param}"
        return None

    def run_script(self, script_text: str) -> ExecutionLog:
        """Interpret a tester script as an ordered call list."""
        log = ExecutionLog()
        call_position = 0
        assertion_position = 0
        for line_number, raw in enumerate(script_text.splitlines(), 1):
            parsed = parse_call(raw, self.rules)
            if parsed is None:
                continue
            name, args = parsed
            text = " ".join([name] + args)
            is_assertion = name.startswith("assert_")

            if is_assertion:
                assertion_position += 1
                fault = self.profile.first_match(FaultTarget.ASSERTION, text, assertion_position)
                position = assertion_position
            else:
                call_position += 1
                fault = self.profile.first_match(FaultTarget.CALL, text, call_position)
                position = call_position

            def event(kind: EventKind, detail: str = "") -> None:
                log.events.append(ExecutionEvent(kind, text, detail, line_number, position))

            if fault is not None:
                event(EventKind.ASSERTION_FAIL if is_assertion else EventKind.API_ERROR, fault.detail)
                continue
            problem = self._validate(name, args)
            if problem is not None:
                event(EventKind.API_ERROR, problem)
                continue
            ok, detail = self._execute(name, args)
            if is_assertion:
                event(EventKind.ASSERTION_PASS if ok else EventKind.ASSERTION_FAIL, detail)
            else:
                event(EventKind.API_CALL)

        logger.debug(f"Script ran: {log.call_event_count} call(s), {len(log.failures())} failure(s)")
        return log

    def deploy(self, config_text: str, script_text: str) -> ExecutionLog:
        """Apply the config, then run the script; one combined log."""
        log = self.apply_config(config_text)
        return log.extend(self.run_script(script_text))
