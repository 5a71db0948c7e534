"""Canonical forms of config lines and tester calls.

The testbed and the metrics share these rules, so a line the simulator accepts
and a line the metrics count are always compared in the same form.
"""

import ipaddress
import json
import re
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Pattern, Tuple

from ..data import data_path
from ..logging_config import get_logger

logger = get_logger("line_normalizer")

CONFIG = "config"
SCRIPT = "script"

# Lines of a script that are Python scaffolding rather than tester calls
_SCAFFOLDING = {
    "import", "from", "def", "class", "if", "elif", "else", "else:", "for", "while",
    "return", "with", "try", "try:", "except", "except:", "finally", "finally:", "pass", "assert",
}

_CALL_FORM = re.compile(
    r"^(?:[A-Za-z_]\w*\s*=\s*)?(?:[A-Za-z_]\w*\.)*([A-Za-z_]\w*)\s*\((.*)\)\s*;?$"
)
_CALL_ARG = re.compile(r"\"[^\"]*\"|'[^']*'|[^,\s]+")
_IDENTIFIER = re.compile(r"^[A-Za-z_]\w*$")


@dataclass
class EquivalenceRules:
    comment_prefixes: Dict[str, List[str]] = field(default_factory=dict)
    aliases: List[Tuple[Pattern, str]] = field(default_factory=list)
    netmask_commands: List[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "EquivalenceRules":
        aliases = []
        for item in data.get("aliases", []):
            flags = re.IGNORECASE if item.get("ignore_case") else 0
            aliases.append((re.compile(item["pattern"], flags), item["replacement"]))
        return cls(
            comment_prefixes={k: list(v) for k, v in data.get("comment_prefixes", {}).items()},
            aliases=aliases,
            netmask_commands=list(data.get("netmask_commands", [])),
        )

    @classmethod
    def load(cls, path: Optional[str] = None) -> "EquivalenceRules":
        path = path or data_path("equivalence_rules.json")
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def is_comment(self, line: str, kind: str) -> bool:
        return any(line.startswith(p) for p in self.comment_prefixes.get(kind, []))


_default_rules: Optional[EquivalenceRules] = None
_rules_lock = threading.Lock()


def default_rules() -> EquivalenceRules:
    global _default_rules
    with _rules_lock:
        if _default_rules is None:
            _default_rules = EquivalenceRules.load()
        return _default_rules


def _netmask_to_prefix(mask: str) -> Optional[int]:
    try:
        value = int(ipaddress.IPv4Address(mask))
    except ipaddress.AddressValueError:
        return None
    bits = format(value, "032b")
    # Contiguous ones then zeros; 0.0.0.0 is /0
    if "01" in bits:
        return None
    return bits.count("1")


def _cidr(line: str, commands: List[str]) -> str:
    for command in commands:
        if not line.startswith(command + " "):
            continue
        rest = line[len(command) + 1:].split(" ")
        if len(rest) >= 2:
            prefix = _netmask_to_prefix(rest[1])
            if prefix is not None and "/" not in rest[0]:
                return " ".join([command, f"{rest[0]}/{prefix}"] + rest[2:])
    return line


def parse_call(line: str, rules: Optional[EquivalenceRules] = None) -> Optional[Tuple[str, List[str]]]:
    """Split one script line into (name, args).

    Accepts ``name arg arg`` as well as ``[var =] [obj.]name(arg, arg)``.
    Blank lines, comments and Python scaffolding yield None.
    """
    rules = rules or default_rules()
    text = line.strip()
    if not text or rules.is_comment(text, SCRIPT):
        return None
    if text.split()[0] in _SCAFFOLDING:
        return None

    match = _CALL_FORM.match(text)
    if match:
        args = []
        for token in _CALL_ARG.findall(match.group(2)):
            if "=" in token and not token.startswith(("'", '"')):
                token = token.split("=", 1)[1]
            args.append(token.strip("'\""))
        return match.group(1), [a for a in args if a]

    tokens = text.split()
    if not _IDENTIFIER.match(tokens[0]) or "=" in tokens[1:]:
        return None
    return tokens[0], [t.strip("'\"") for t in tokens[1:]]


def normalize_line(raw: str, kind: str, rules: Optional[EquivalenceRules] = None) -> Optional[str]:
    """Canonical form of one config line or script call; None when the line is not a unit.

    Idempotent: normalizing a normalized line returns it unchanged.
    """
    rules = rules or default_rules()
    if kind == SCRIPT:
        parsed = parse_call(raw, rules)
        if parsed is None:
            return None
        name, args = parsed
        return " ".join([name] + args)

    text = " ".join(raw.split())
    if not text or rules.is_comment(text, CONFIG):
        return None
    for pattern, replacement in rules.aliases:
        text = pattern.sub(replacement, text)
    return _cidr(text, rules.netmask_commands)


def normalize_lines(raw_lines: List[str], kind: str, rules: Optional[EquivalenceRules] = None) -> List[str]:
    units = []
    for raw in raw_lines:
        unit = normalize_line(raw, kind, rules)
        if unit is not None:
            units.append(unit)
    return units
