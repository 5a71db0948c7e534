"""Simulated testbed data: execution logs, fault profiles, tester API registry."""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple


class EventKind(Enum):
    CONFIG_ACCEPT = "config_accept"
    CONFIG_REJECT = "config_reject"
    API_CALL = "api_call"
    API_ERROR = "api_error"
    ASSERTION_PASS = "assertion_pass"
    ASSERTION_FAIL = "assertion_fail"


FAILURE_KINDS = {EventKind.CONFIG_REJECT, EventKind.API_ERROR, EventKind.ASSERTION_FAIL}
CONFIG_KINDS = {EventKind.CONFIG_ACCEPT, EventKind.CONFIG_REJECT}
EXECUTED_CALL_KINDS = {EventKind.API_CALL, EventKind.ASSERTION_PASS, EventKind.ASSERTION_FAIL}
CALL_KINDS = EXECUTED_CALL_KINDS | {EventKind.API_ERROR}


@dataclass
class ExecutionEvent:
    """One thing that happened on the testbed."""

    kind: EventKind
    line_or_call: str
    detail: str = ""
    # 1-based line number in the submitted config or script
    line_number: Optional[int] = None
    # 1-based ordinal among events of the same family (config line, call, assertion)
    position: Optional[int] = None

    @property
    def is_failure(self) -> bool:
        return self.kind in FAILURE_KINDS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "line_or_call": self.line_or_call,
            "detail": self.detail,
            "line_number": self.line_number,
            "position": self.position,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExecutionEvent":
        return cls(
            kind=EventKind(data["kind"]),
            line_or_call=data.get("line_or_call", ""),
            detail=data.get("detail", ""),
            line_number=data.get("line_number"),
            position=data.get("position"),
        )

    def render(self) -> str:
        where = f"line {self.line_number}: " if self.line_number is not None else ""
        return f"[{self.kind.value}] {where}{self.line_or_call} {('- ' + self.detail) if self.detail else ''}".rstrip()


@dataclass
class ExecutionLog:
    """Ordered execution events of one deployment."""

    events: List[ExecutionEvent] = field(default_factory=list)

    def extend(self, other: "ExecutionLog") -> "ExecutionLog":
        self.events.extend(other.events)
        return self

    def failures(self) -> List[Tuple[int, ExecutionEvent]]:
        return [(i, e) for i, e in enumerate(self.events) if e.is_failure]

    @property
    def is_clean(self) -> bool:
        return not any(e.is_failure for e in self.events)

    @property
    def config_event_count(self) -> int:
        return sum(1 for e in self.events if e.kind in CONFIG_KINDS)

    @property
    def call_event_count(self) -> int:
        return sum(1 for e in self.events if e.kind in CALL_KINDS)

    def api_calls(self) -> List[str]:
        """Calls the tester executed (assertions included), in execution order."""
        return [e.line_or_call for e in self.events if e.kind in EXECUTED_CALL_KINDS]

    def excerpt(self, indices: List[int]) -> str:
        return "\n".join(self.events[i].render() for i in indices)

    def __len__(self) -> int:
        return len(self.events)

    def to_records(self) -> List[Dict[str, Any]]:
        return [e.to_dict() for e in self.events]

    @classmethod
    def from_records(cls, records: List[Dict[str, Any]]) -> "ExecutionLog":
        return cls(events=[ExecutionEvent.from_dict(r) for r in records])


class FaultTarget(Enum):
    CONFIG = "config"
    CALL = "call"
    ASSERTION = "assertion"


_TARGET_EVENTS = {
    FaultTarget.CONFIG: EventKind.CONFIG_REJECT,
    FaultTarget.CALL: EventKind.API_ERROR,
    FaultTarget.ASSERTION: EventKind.ASSERTION_FAIL,
}


@dataclass
class InjectedFault:
    """A deterministic failure the simulator produces when its trigger matches."""

    trigger: str
    target: FaultTarget = FaultTarget.CONFIG
    detail: str = "injected fault"
    # Only the n-th item of the target family fails (1-based); None means every match
    occurrence: Optional[int] = None

    def __post_init__(self):
        self._pattern = re.compile(self.trigger, re.IGNORECASE)

    @property
    def event(self) -> EventKind:
        return _TARGET_EVENTS[self.target]

    def matches(self, text: str, position: int) -> bool:
        if self.occurrence is not None and position != self.occurrence:
            return False
        return bool(self._pattern.search(text))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trigger": self.trigger,
            "target": self.target.value,
            "detail": self.detail,
            "occurrence": self.occurrence,
            "event": self.event.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InjectedFault":
        return cls(
            trigger=data["trigger"],
            target=FaultTarget(data.get("target", "config")),
            detail=data.get("detail", "injected fault"),
            occurrence=data.get("occurrence"),
        )


@dataclass
class FaultProfile:
    """Named set of injected faults; triggers must not overlap."""

    name: str = "none"
    faults: List[InjectedFault] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for fault in self.faults:
            key = (fault.target, fault.trigger, fault.occurrence)
            if key in seen:
                raise ValueError(f"Fault profile '{self.name}' repeats trigger {fault.trigger!r}")
            seen.add(key)

    def first_match(self, target: FaultTarget, text: str, position: int) -> Optional[InjectedFault]:
        for fault in self.faults:
            if fault.target == target and fault.matches(text, position):
                return fault
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "faults": [f.to_dict() for f in self.faults]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FaultProfile":
        return cls(
            name=data.get("name", "none"),
            faults=[InjectedFault.from_dict(f) for f in data.get("faults", [])],
        )


@dataclass
class TesterApiEntry:
    """One tester API the simulator accepts."""

    name: str
    arity: int
    # One validator name per positional parameter (see testbed_sim.PARAM_VALIDATORS)
    parameters: List[str] = field(default_factory=list)
    effect: str = ""

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError(f"API {self.name}: arity must be >= 0")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TesterApiEntry":
        params = data.get("parameters", [])
        return cls(
            name=data["name"],
            arity=data.get("arity", len(params)),
            parameters=params,
            effect=data.get("effect", ""),
        )


@dataclass
class TesterApiRegistry:
    entries: Dict[str, TesterApiEntry] = field(default_factory=dict)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def get(self, name: str) -> Optional[TesterApiEntry]:
        return self.entries.get(name)

    def names(self) -> List[str]:
        return sorted(self.entries)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TesterApiRegistry":
        entries: Dict[str, TesterApiEntry] = {}
        for item in data.get("apis", []):
            entry = TesterApiEntry.from_dict(item)
            if entry.name in entries:
                raise ValueError(f"Duplicate tester API name: {entry.name}")
            entries[entry.name] = entry
        return cls(entries=entries)


class FaultCategory(Enum):
    """Fixed categories runtime failures are sorted into."""

    SYNTAX_ERROR = "syntax_error"
    CONFIGURATION_MISMATCH = "configuration_mismatch"
    UNSUPPORTED_COMMAND = "unsupported_command"
    ASSERTION_FAILURE = "assertion_failure"
    ENVIRONMENT = "environment"
