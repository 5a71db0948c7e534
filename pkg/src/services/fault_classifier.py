"""Sort failure events of an execution log into fault categories."""

import json
import re
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Pattern

from ..data import data_path
from ..errors import PreconditionViolation
from ..logging_config import get_logger
from ..models.loop import FaultReport
from ..models.testbed import EventKind, ExecutionLog, FaultCategory

logger = get_logger("fault_classifier")


@dataclass
class FaultRule:
    event: EventKind
    pattern: Optional[Pattern]
    category: FaultCategory

    def applies(self, kind: EventKind, detail: str) -> bool:
        return kind == self.event and (self.pattern is None or bool(self.pattern.search(detail)))


@dataclass
class FaultRules:
    """Ordered rules; the first rule matching an event decides its category."""

    rules: List[FaultRule] = field(default_factory=list)
    category_fixes: Dict[FaultCategory, str] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "FaultRules":
        rules = []
        for item in data.get("rules", []):
            pattern = item.get("pattern") or ""
            rules.append(FaultRule(
                event=EventKind(item["event"]),
                pattern=re.compile(pattern, re.IGNORECASE) if pattern else None,
                category=FaultCategory(item["category"]),
            ))
        fixes = {FaultCategory(k): v for k, v in data.get("category_fixes", {}).items()}
        return cls(rules=rules, category_fixes=fixes)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "FaultRules":
        path = path or data_path("fault_rules.json")
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def categorize(self, kind: EventKind, detail: str) -> FaultCategory:
        for rule in self.rules:
            if rule.applies(kind, detail):
                return rule.category
        # Rule files always end with catch-alls; this only guards hand-built rule sets
        return FaultCategory.ENVIRONMENT

    def generic_fix(self, category: FaultCategory) -> str:
        return self.category_fixes.get(category, "Inspect the failing line and redraft it.")


_default_rules: Optional[FaultRules] = None
_lock = threading.Lock()


def default_fault_rules() -> FaultRules:
    global _default_rules
    with _lock:
        if _default_rules is None:
            _default_rules = FaultRules.load()
        return _default_rules


def classify(log: ExecutionLog, rules: Optional[FaultRules] = None) -> List[FaultReport]:
    """One FaultReport per failure event, in log order."""
    if len(log) == 0:
        raise PreconditionViolation("cannot classify an empty execution log")
    rules = rules or default_fault_rules()
    reports = []
    for index, event in log.failures():
        category = rules.categorize(event.kind, event.detail)
        reports.append(FaultReport(category=category, evidence=event.render(), source_events=[index]))
    if reports:
        logger.debug(f"Classified {len(reports)} fault(s): {', '.join(r.category.value for r in reports)}")
    return reports
