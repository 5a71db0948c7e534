"""Completion gateway used by every agent.

Prompt templates with named slots, schema-validated structured output with a
bounded repair loop, and interchangeable backends:

* ``live``: HTTP chat-completion endpoint (requests)
* ``replay``: answers from a recorded transcript, looked up by prompt hash
* ``record``: forwards to an upstream backend and appends every exchange to a transcript
* ``offline``: deterministic rule-based responder, no model involved
"""

import hashlib
import json
import re
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Deque, Dict, FrozenSet, List, Optional, Type, TypeVar

import requests
from pydantic import BaseModel, ValidationError

from ..data import data_path
from ..errors import BackendUnavailable, MissingSlot, PreconditionViolation, ReplayMiss, SchemaViolation
from ..logging_config import get_logger
from ..models.jsonio import append_jsonl, read_jsonl
from ..models.settings import BackendDescriptor

logger = get_logger("llm_gateway")

M = TypeVar("M", bound=BaseModel)

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
_FENCED_JSON_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

REPAIR_SUFFIX = (
    "\n\nYour previous answer could not be accepted:\n{error}\n"
    "Answer again with a single JSON document that strictly follows the required format."
)


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text with ``{slot}`` markers."""

    template_id: str
    body: str
    required_slots: Optional[FrozenSet[str]] = None

    @property
    def slots(self) -> FrozenSet[str]:
        return frozenset(_SLOT_RE.findall(self.body))

    @property
    def required(self) -> FrozenSet[str]:
        return self.required_slots if self.required_slots is not None else self.slots


def render(template: PromptTemplate, bindings: Dict[str, Any]) -> str:
    """Substitute every slot in one pass; bound values are never re-scanned.

    Raises MissingSlot for an unbound required slot. Optional slots without a
    binding render empty, so no marker survives.
    """
    for name in sorted(template.required):
        if name not in bindings:
            raise MissingSlot(name, template.template_id)

    def substitute(match: "re.Match") -> str:
        value = bindings.get(match.group(1), "")
        return value if isinstance(value, str) else str(value)

    return _SLOT_RE.sub(substitute, template.body)


class TemplateLibrary:
    """Loads ``<template_id>.txt`` files from the prompt directory on demand."""

    def __init__(self, directory: Optional[str] = None):
        self.directory = directory or data_path("prompts")
        self._cache: Dict[str, PromptTemplate] = {}
        self._lock = threading.Lock()

    def get(self, template_id: str) -> PromptTemplate:
        with self._lock:
            if template_id not in self._cache:
                path = f"{self.directory}/{template_id}.txt"
                with open(path, "r", encoding="utf-8") as f:
                    self._cache[template_id] = PromptTemplate(template_id, f.read())
                logger.debug(f"Loaded prompt template '{template_id}'")
            return self._cache[template_id]

    def render(self, template_id: str, **bindings: Any) -> str:
        return render(self.get(template_id), bindings)


_library: Optional[TemplateLibrary] = None


def default_library() -> TemplateLibrary:
    global _library
    if _library is None:
        _library = TemplateLibrary()
    return _library


# ---------------------------------------------------------------------------
# Exchanges and transcripts
# ---------------------------------------------------------------------------


def normalize_prompt(prompt: str) -> str:
    return " ".join(prompt.split())


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(normalize_prompt(prompt).encode("utf-8")).hexdigest()


@dataclass
class Exchange:
    """One backend call."""

    request_hash: str
    prompt: str
    response: str
    timestamp: str = ""
    template_id: str = ""
    latency_ms: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "request_hash": self.request_hash,
            "template_id": self.template_id,
            "prompt": self.prompt,
            "response": self.response,
            "timestamp": self.timestamp,
            "latency_ms": round(self.latency_ms, 1),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Exchange":
        return cls(
            request_hash=data["request_hash"],
            prompt=data.get("prompt", ""),
            response=data.get("response", ""),
            timestamp=data.get("timestamp", ""),
            template_id=data.get("template_id", ""),
            latency_ms=data.get("latency_ms", 0.0),
        )


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------


class CompletionBackend:
    """A backend answers one prompt.

    ``request_hash`` identifies the logical request (repair prompts share the hash
    of the prompt they repair). ``hints`` carry structured context for the offline
    responder and are never sent to a model.
    """

    name = "backend"

    def complete(
        self, prompt: str, request_hash: str, template_id: str = "", hints: Optional[Dict[str, Any]] = None
    ) -> str:
        raise NotImplementedError


class LiveBackend(CompletionBackend):
    """HTTP chat-completion endpoint: message list in, message out."""

    name = "live"

    def __init__(self, descriptor: BackendDescriptor, session: Optional[requests.Session] = None):
        if not descriptor.endpoint:
            raise BackendUnavailable("no endpoint configured")
        self.descriptor = descriptor
        self.session = session or requests.Session()

    def complete(self, prompt, request_hash, template_id="", hints=None) -> str:
        headers = {"Content-Type": "application/json"}
        if self.descriptor.api_key:
            headers["Authorization"] = f"Bearer {self.descriptor.api_key}"
        payload = {
            "model": self.descriptor.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.descriptor.temperature,
        }
        try:
            response = self.session.post(
                self.descriptor.endpoint,
                json=payload,
                headers=headers,
                timeout=self.descriptor.timeout_seconds,
            )
            response.raise_for_status()
            data = response.json()
        except requests.RequestException as e:
            raise BackendUnavailable(str(e)) from e
        except ValueError as e:
            raise BackendUnavailable(f"endpoint returned non-JSON body: {e}") from e

        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise BackendUnavailable(f"unexpected response format from endpoint: {e}") from e


class CallableBackend(CompletionBackend):
    """Wraps a plain function ``(prompt, template_id, hints) -> str``."""

    name = "callable"

    def __init__(self, fn: Callable[[str, str, Dict[str, Any]], str]):
        self.fn = fn

    def complete(self, prompt, request_hash, template_id="", hints=None) -> str:
        return self.fn(prompt, template_id, hints or {})


class OfflineBackend(CompletionBackend):
    """Deterministic rule-based answers computed from the request hints."""

    name = "offline"

    def __init__(self, responder=None):
        if responder is None:
            from .offline_responder import OfflineResponder

            responder = OfflineResponder()
        self.responder = responder

    def complete(self, prompt, request_hash, template_id="", hints=None) -> str:
        return self.responder.respond(template_id, prompt, hints or {})


class ReplayBackend(CompletionBackend):
    """Answers from recorded exchanges.

    Lookup is by request hash; repeated hashes are served in recorded order.
    """

    name = "replay"

    def __init__(self, exchanges: List[Exchange]):
        self._responses: Dict[str, Deque[str]] = defaultdict(deque)
        for exchange in exchanges:
            self._responses[exchange.request_hash].append(exchange.response)
        self._lock = threading.Lock()
        logger.debug(f"Replay backend loaded {len(exchanges)} exchanges ({len(self._responses)} distinct prompts)")

    @classmethod
    def from_file(cls, path: str) -> "ReplayBackend":
        try:
            records = read_jsonl(path)
        except FileNotFoundError as e:
            raise BackendUnavailable(f"transcript not found: {path}") from e
        return cls([Exchange.from_dict(r) for r in records])

    def complete(self, prompt, request_hash, template_id="", hints=None) -> str:
        with self._lock:
            queue = self._responses.get(request_hash)
            if not queue:
                raise ReplayMiss(request_hash, template_id)
            return queue.popleft()


class RecordingBackend(CompletionBackend):
    """Forwards to an upstream backend and appends each exchange to a transcript."""

    name = "record"

    def __init__(self, upstream: CompletionBackend, transcript_path: str, append: bool = False):
        self.upstream = upstream
        self.transcript_path = transcript_path
        self._lock = threading.Lock()
        if not append:
            with open(transcript_path, "w", encoding="utf-8"):
                pass

    def complete(self, prompt, request_hash, template_id="", hints=None) -> str:
        started = time.perf_counter()
        response = self.upstream.complete(prompt, request_hash, template_id, hints)
        exchange = Exchange(
            request_hash=request_hash,
            prompt=prompt,
            response=response,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            template_id=template_id,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )
        with self._lock:
            append_jsonl(self.transcript_path, exchange.to_dict())
        return response


def build_backend(descriptor: BackendDescriptor, append: bool = False) -> CompletionBackend:
    """Create the backend a descriptor asks for."""
    descriptor = descriptor.with_env()
    descriptor.validate()
    if descriptor.mode == "live":
        return LiveBackend(descriptor)
    if descriptor.mode == "offline":
        return OfflineBackend()
    if descriptor.mode == "replay":
        return ReplayBackend.from_file(descriptor.transcript_path)
    upstream = OfflineBackend() if descriptor.upstream == "offline" else LiveBackend(descriptor)
    return RecordingBackend(upstream, descriptor.transcript_path, append=append)


# ---------------------------------------------------------------------------
# Gateway
# ---------------------------------------------------------------------------


def extract_json(text: str) -> Any:
    """Parse the JSON document in a model answer (fenced block or first {...} / [...])."""
    text = text.strip()
    candidates = [m.group(1).strip() for m in _FENCED_JSON_RE.finditer(text)]
    candidates.append(text)
    for opener, closer in (("{", "}"), ("[", "]")):
        start, end = text.find(opener), text.rfind(closer)
        if start != -1 and end > start:
            candidates.append(text[start: end + 1])
    last_error: Optional[Exception] = None
    for candidate in candidates:
        try:
            return json.loads(candidate)
        except json.JSONDecodeError as e:
            last_error = e
    raise ValueError(f"no parseable JSON document in answer ({last_error})")


class CompletionGateway:
    """Uniform completion interface shared by all agents.

    Safe for concurrent use; every request is independent.
    """

    def __init__(
        self,
        backend: CompletionBackend,
        max_repairs: int = 3,
        library: Optional[TemplateLibrary] = None,
        model_name: str = "",
    ):
        self.backend = backend
        self.max_repairs = max_repairs
        self.library = library or default_library()
        self.model_name = model_name or backend.name
        self.exchanges: List[Exchange] = []
        self._lock = threading.Lock()

    @classmethod
    def from_descriptor(cls, descriptor: BackendDescriptor, max_repairs: int = 3, append: bool = False) -> "CompletionGateway":
        backend = build_backend(descriptor, append=append)
        logger.info(f"Completion gateway: mode={descriptor.mode}, model={descriptor.model_name}")
        return cls(backend, max_repairs=max_repairs, model_name=descriptor.model_name)

    @property
    def call_count(self) -> int:
        return len(self.exchanges)

    def prompts_for(self, template_id: str) -> List[str]:
        """Prompts sent so far for one template (first attempts and repairs)."""
        with self._lock:
            return [e.prompt for e in self.exchanges if e.template_id == template_id]

    def render(self, template_id: str, **bindings: Any) -> str:
        return self.library.render(template_id, **bindings)

    def _call(self, prompt: str, request_hash: str, template_id: str, hints: Optional[Dict[str, Any]]) -> str:
        started = time.perf_counter()
        response = self.backend.complete(prompt, request_hash, template_id, hints)
        exchange = Exchange(
            request_hash=request_hash,
            prompt=prompt,
            response=response,
            template_id=template_id,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )
        with self._lock:
            self.exchanges.append(exchange)
        logger.debug(f"[{template_id}] {request_hash[:12]} answered in {exchange.latency_ms:.0f} ms")
        return response

    def complete_text(self, prompt: str, template_id: str = "", hints: Optional[Dict[str, Any]] = None) -> str:
        return self._call(prompt, prompt_hash(prompt), template_id, hints)

    def complete_structured(
        self,
        prompt: str,
        schema: Type[M],
        max_repairs: Optional[int] = None,
        template_id: str = "",
        hints: Optional[Dict[str, Any]] = None,
    ) -> M:
        """Return the answer validated against ``schema``.

        A rejected answer is re-prompted with the validation error appended, at
        most ``max_repairs`` times, so the backend sees at most 1 + max_repairs calls.
        """
        repairs = self.max_repairs if max_repairs is None else max_repairs
        if repairs < 0:
            raise PreconditionViolation("max_repairs must be >= 0")

        request_hash = prompt_hash(prompt)
        current = prompt
        error = ""
        for attempt in range(1, repairs + 2):
            answer = self._call(current, request_hash, template_id, hints)
            try:
                value = schema.model_validate(extract_json(answer))
                if attempt > 1:
                    logger.debug(f"[{template_id}] valid after {attempt - 1} repair(s)")
                return value
            except (ValueError, ValidationError) as e:
                error = str(e)
                logger.debug(f"[{template_id}] attempt {attempt} rejected: {error.splitlines()[0] if error else e}")
                current = prompt + REPAIR_SUFFIX.format(error=error)

        logger.warning(f"[{template_id}] output still invalid after {repairs + 1} attempts")
        raise SchemaViolation(error, attempts=repairs + 1, template_id=template_id)
