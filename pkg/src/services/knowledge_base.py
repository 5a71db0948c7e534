"""Task knowledge base for artifact generation.

On disk a knowledge base is a directory::

    task_info.json        task description, repository layout, device inventory
    heuristics.json       expert heuristics
    sops.json             ordered standard operating procedure
    experience_pool.json  remembered faults and their fixes
    index.json            hierarchical summary index over the payloads
    few_shots.json        orchestrator examples with pass statistics
    payloads/*.md         full documentation entries

The pool, the index summaries and the few-shot examples change while a run
goes on; the run keeps its own copy so the bundled template stays untouched.
"""

import json
import os
import re
import shutil
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

from ..data import data_path
from ..errors import EmptyIndex, ForgeKnowledgeError
from ..logging_config import get_logger
from ..models.artifact import (
    ExperienceEntry,
    FewShotExample,
    FineGrainedIntent,
    RetrievalHit,
    SummaryIndexNode,
    TaskInfo,
    TaskKnowledgeBase,
)
from ..models.jsonio import read_json, write_json
from ..models.testbed import FaultCategory
from .text_matching import relevance, token_overlap

logger = get_logger("knowledge_base")

TEMPLATE_DIR = data_path("kb_template")

_LINE_PREFIX = re.compile(r"\bline \d+:\s*")
_ADDRESS = re.compile(r"\b\d{1,3}(?:\.\d{1,3}){3}(?:/\d{1,2})?\b")
_DIGITS = re.compile(r"\d+")


def error_signature(evidence: str) -> str:
    """Normalize fault evidence so the same mistake matches across cases."""
    text = evidence.lower()
    text = _LINE_PREFIX.sub("", text)
    text = _ADDRESS.sub("<addr>", text)
    text = _DIGITS.sub("<n>", text)
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Experience pool
# ---------------------------------------------------------------------------


class ExperiencePool:
    """Error signatures with their resolutions; one entry per signature.

    Writes go through a lock so cases generated in parallel share one pool.
    """

    def __init__(self, entries: Optional[List[ExperienceEntry]] = None):
        self.entries: List[ExperienceEntry] = []
        self._lock = threading.Lock()
        for entry in entries or []:
            if self._find(entry.error_signature) is not None:
                raise ForgeKnowledgeError(f"Duplicate experience signature: {entry.error_signature}")
            self.entries.append(entry)

    def _find(self, signature: str) -> Optional[ExperienceEntry]:
        for entry in self.entries:
            if entry.error_signature == signature:
                return entry
        return None

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, evidence: str, cutoff: float) -> Optional[ExperienceEntry]:
        """Best entry whose signature overlaps the evidence by at least ``cutoff``."""
        signature = error_signature(evidence)
        with self._lock:
            best, best_score = None, 0.0
            for entry in self.entries:
                score = token_overlap(signature, entry.error_signature)
                if score >= cutoff and score > best_score:
                    best, best_score = entry, score
            if best is not None:
                best.hit_count += 1
                logger.debug(f"Experience hit ({best_score:.2f}): {best.error_signature}")
            return best

    def record(self, evidence: str, category: FaultCategory, resolution: str, provenance: str = "") -> bool:
        """Add an entry; an existing signature only has its hit count bumped. True if added."""
        signature = error_signature(evidence)
        with self._lock:
            existing = self._find(signature)
            if existing is not None:
                existing.hit_count += 1
                return False
            self.entries.append(ExperienceEntry(signature, category, resolution, provenance))
            logger.info(f"Recorded experience: {signature} -> {resolution}")
            return True

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}


# ---------------------------------------------------------------------------
# Few-shot examples
# ---------------------------------------------------------------------------


class FewShotStore:
    """Bounded set of orchestrator examples ranked by how often they led to a pass."""

    def __init__(self, examples: Optional[List[FewShotExample]] = None, capacity: int = 10):
        self.capacity = capacity
        self.examples: List[FewShotExample] = list(examples or [])[:capacity]
        self._lock = threading.Lock()

    def _score(self, example: FewShotExample, case_text: str) -> float:
        return example.pass_rate * (0.5 + 0.5 * relevance(case_text, example.case_text))

    def select(self, case_text: str, n: int) -> List[FewShotExample]:
        ranked = sorted(
            enumerate(self.examples), key=lambda pair: (-self._score(pair[1], case_text), pair[0])
        )
        return [example for _, example in ranked[:n]]

    def note_use(self, case_ids: List[str], passed: bool) -> None:
        with self._lock:
            for example in self.examples:
                if example.case_id in case_ids:
                    example.uses += 1
                    example.passes += int(passed)

    def offer(self, case_id: str, case_text: str, intents: FineGrainedIntent) -> bool:
        """Keep a case whose intents passed on the first draft; evicts the weakest when full."""
        with self._lock:
            if any(e.case_id == case_id for e in self.examples):
                return False
            candidate = FewShotExample(case_id, case_text, intents, passes=1, uses=1)
            if len(self.examples) < self.capacity:
                self.examples.append(candidate)
                return True
            worst = min(range(len(self.examples)), key=lambda i: (self.examples[i].pass_rate, -i))
            if self.examples[worst].pass_rate >= candidate.pass_rate:
                return False
            logger.debug(f"Few-shot {self.examples[worst].case_id} replaced by {case_id}")
            self.examples[worst] = candidate
            return True

    def to_dict(self) -> dict:
        return {"capacity": self.capacity, "examples": [e.to_dict() for e in self.examples]}


# ---------------------------------------------------------------------------
# Summary index retrieval
# ---------------------------------------------------------------------------


def _leaves(index: SummaryIndexNode) -> List[Tuple[SummaryIndexNode, List[SummaryIndexNode]]]:
    """Leaves below the root in pre-order, each with its non-root ancestors."""
    found = []

    def walk(node: SummaryIndexNode, ancestors: List[SummaryIndexNode]) -> None:
        if node.is_leaf:
            found.append((node, ancestors))
            return
        for child in node.children:
            walk(child, ancestors + [node])

    for child in index.children:
        walk(child, [])
    return found


def retrieve(
    index: SummaryIndexNode,
    query: str,
    k: int,
    load_payload: Optional[Callable[[str], str]] = None,
) -> List[RetrievalHit]:
    """Top-k documentation leaves for a query.

    A leaf scores by its own summary and, with less weight, by the summaries of
    the branches above it. Without any lexical overlap the first leaf of every
    top-level branch is returned, flagged low-confidence.
    """
    if not index.children:
        raise EmptyIndex()
    if k <= 0:
        return []
    load_payload = load_payload or (lambda ref: "")

    def hit(leaf: SummaryIndexNode, ancestors: List[SummaryIndexNode], score: float, low: bool) -> RetrievalHit:
        path = [a.entry_id for a in ancestors] + [leaf.entry_id]
        return RetrievalHit(leaf.entry_id, path, leaf.payload_ref or "", load_payload(leaf.payload_ref or ""), score, low)

    scored = []
    for order, (leaf, ancestors) in enumerate(_leaves(index)):
        own = relevance(query, leaf.summary)
        above = (
            sum(relevance(query, a.summary) for a in ancestors) / len(ancestors) if ancestors else own
        )
        score = 0.7 * own + 0.3 * above
        if score > 0:
            scored.append((score, order, leaf, ancestors))

    if not scored:
        logger.debug(f"No index entry matches '{query[:60]}'; falling back to top-level branches")
        fallback = []
        for child in index.children:
            leaf, ancestors = _leaves(SummaryIndexNode("", "", [child]))[0]
            fallback.append(hit(leaf, ancestors, 0.0, True))
        return fallback[:k]

    scored.sort(key=lambda item: (-item[0], item[1]))
    return [hit(leaf, ancestors, score, False) for score, _, leaf, ancestors in scored[:k]]


# ---------------------------------------------------------------------------
# Knowledge base directory
# ---------------------------------------------------------------------------


@dataclass
class KnowledgeBase:
    root: str
    task: TaskKnowledgeBase
    index: SummaryIndexNode
    pool: ExperiencePool
    few_shots: FewShotStore
    _index_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def load(cls, root: str, devices: Optional[List[str]] = None) -> "KnowledgeBase":
        """Load a KB directory; ``devices`` are the testbed's device names to check the inventory against."""
        if not os.path.isdir(root):
            raise ForgeKnowledgeError(f"Knowledge base directory not found: {root}")
        try:
            task_info = TaskInfo.from_dict(read_json(os.path.join(root, "task_info.json")))
            heuristics = read_json(os.path.join(root, "heuristics.json")).get("heuristics", [])
            sops = read_json(os.path.join(root, "sops.json")).get("sops", [])
            index = SummaryIndexNode.from_dict(read_json(os.path.join(root, "index.json")))
            pool_data = read_json(os.path.join(root, "experience_pool.json"))
            shots_data = read_json(os.path.join(root, "few_shots.json"))
        except (OSError, json.JSONDecodeError, KeyError) as e:
            raise ForgeKnowledgeError(f"Cannot read knowledge base {root}: {e}") from e

        try:
            task = TaskKnowledgeBase(task_info, heuristics, sops)
            index.validate()
        except ValueError as e:
            raise ForgeKnowledgeError(str(e)) from e

        if devices is not None:
            missing = sorted(set(task_info.device_inventory) - set(devices))
            if missing:
                raise ForgeKnowledgeError(f"Device inventory names unknown testbed devices: {missing}")

        pool = ExperiencePool([ExperienceEntry.from_dict(e) for e in pool_data.get("entries", [])])
        few_shots = FewShotStore(
            [FewShotExample.from_dict(e) for e in shots_data.get("examples", [])],
            capacity=shots_data.get("capacity", 10),
        )
        logger.debug(f"Loaded knowledge base {root}: {len(pool)} experience entries")
        return cls(root, task, index, pool, few_shots)

    @staticmethod
    def init_default(target: str) -> str:
        """Copy the bundled template to ``target`` (must not exist yet)."""
        if os.path.exists(target):
            raise ForgeKnowledgeError(f"Refusing to overwrite existing path: {target}")
        shutil.copytree(TEMPLATE_DIR, target)
        logger.info(f"Initialized knowledge base at {target}")
        return target

    def payload(self, ref: str) -> str:
        if not ref:
            return ""
        path = os.path.join(self.root, "payloads", ref)
        try:
            with open(path, "r", encoding="utf-8") as f:
                return f.read()
        except OSError:
            logger.warning(f"Payload missing: {ref}")
            return ""

    def all_payloads(self) -> List[Tuple[str, str]]:
        """(entry_id, payload) of every leaf, used for manual lookup after a retrieval miss."""
        return [(leaf.entry_id, self.payload(leaf.payload_ref or "")) for leaf, _ in _leaves(self.index)]

    def retrieve(self, query: str, k: int) -> List[RetrievalHit]:
        with self._index_lock:
            return retrieve(self.index, query, k, self.payload)

    def refresh_summary(self, entry_id: str, keywords: List[str]) -> bool:
        """Append missing keywords to an index summary; True if it changed."""
        with self._index_lock:
            for node in self.index.iter_nodes():
                if node.entry_id != entry_id:
                    continue
                missing = [k for k in keywords if k.lower() not in node.summary.lower()]
                if not missing:
                    return False
                node.summary = f"{node.summary} Keywords: {', '.join(missing)}"
                logger.info(f"Index summary {entry_id} refreshed with {', '.join(missing)}")
                return True
        return False

    def save(self, root: Optional[str] = None) -> str:
        """Write the mutable parts (pool, index, few-shots); copies the rest when saving elsewhere."""
        root = root or self.root
        if os.path.abspath(root) != os.path.abspath(self.root):
            if os.path.exists(root):
                shutil.rmtree(root)
            shutil.copytree(self.root, root)
        write_json(os.path.join(root, "experience_pool.json"), self.pool.to_dict())
        write_json(os.path.join(root, "index.json"), self.index.to_dict())
        write_json(os.path.join(root, "few_shots.json"), self.few_shots.to_dict())
        return root
