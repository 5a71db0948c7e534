"""Registry of auxiliary modeling tools.

Descriptors are shown to the protocol-specific agent; invoking a tool goes through
a callback that reports the tool as unavailable unless one is registered.
"""

import json
from typing import Any, Callable, Dict, List, Optional

from ..data import data_path
from ..errors import UnknownTool
from ..logging_config import get_logger
from ..models.protocol_models import ToolDescriptor

logger = get_logger("toolkit")

ToolCallback = Callable[[Dict[str, Any]], Dict[str, Any]]


def _unavailable(tool_name: str) -> ToolCallback:
    def callback(payload: Dict[str, Any]) -> Dict[str, Any]:
        return {"tool": tool_name, "status": "unavailable"}

    return callback


class Toolkit:
    def __init__(self, descriptors: List[ToolDescriptor]):
        self._descriptors: Dict[str, ToolDescriptor] = {}
        for descriptor in descriptors:
            if descriptor.tool_name in self._descriptors:
                raise ValueError(f"Duplicate tool name: {descriptor.tool_name}")
            self._descriptors[descriptor.tool_name] = descriptor
        self._callbacks: Dict[str, ToolCallback] = {}

    @classmethod
    def load(cls, path: Optional[str] = None) -> "Toolkit":
        path = path or data_path("toolkit.json")
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls([ToolDescriptor.from_dict(t) for t in data.get("tools", [])])

    def __contains__(self, name: str) -> bool:
        return name in self._descriptors

    def names(self) -> List[str]:
        return list(self._descriptors)

    def descriptors(self) -> List[ToolDescriptor]:
        return list(self._descriptors.values())

    def prompt_text(self) -> str:
        return "\n".join(d.prompt_text() for d in self._descriptors.values())

    def register(self, name: str, callback: ToolCallback) -> None:
        if name not in self._descriptors:
            raise UnknownTool(name)
        self._callbacks[name] = callback

    def invoke(self, name: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        if name not in self._descriptors:
            raise UnknownTool(name)
        callback = self._callbacks.get(name, _unavailable(name))
        result = callback(payload)
        logger.debug(f"Tool {name} -> {result.get('status', 'ok')}")
        return result
